//! Static matplotlib scripts for the CSVs of a run directory.
//!
//! Each script reads only CSVs next to it and saves a PNG of the same
//! stem. Display rounding happens here, never in the CSVs.

use std::path::Path;

use crate::CliError;

const PRELUDE: &str = r#"import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.colors import LogNorm

HERE = os.path.dirname(os.path.abspath(__file__))


def rows(name):
    with open(os.path.join(HERE, name), newline="") as f:
        return list(csv.DictReader(f))


def num(s):
    return float(s) if s != "" else float("nan")


def save(fig, stem):
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, stem + ".png"), dpi=150)
"#;

const SWEEP: &str = r#"
data = rows("sweep.csv")
meta = rows("sweep_meta.csv")[0]
ratio = num(meta["area"]) / num(meta["perimeter"])
modes = {}
for r in data:
    modes.setdefault(int(r["k"]), []).append((num(r["p"]), num(r["mu"])))
fig, ax = plt.subplots(figsize=(6, 4.5))
for k, pts in sorted(modes.items()):
    p, mu = zip(*pts)
    ax.loglog(p, mu, lw=1, label=f"k={k}" if k < 6 else None)
p = sorted({num(r["p"]) for r in data})
ax.loglog(p, [x ** 0.5 for x in p], "k-", lw=2, label=r"$\sqrt{p}$")
ax.loglog(p, [x * ratio for x in p], "k--", lw=2, label=r"$p|\Omega|/|\partial\Omega|$")
ax.set_xlabel("p")
ax.set_ylabel(r"$\mu_k^{(p)}$")
ax.legend(fontsize=8)
save(fig, "plot_sweep")
"#;

const PROFILES: &str = r#"
import math

data = rows("profiles.csv")
mu = {int(r["k"]): num(r["mu"]) for r in rows("profile_modes.csv")}
fig, ax = plt.subplots(figsize=(6, 4.5))
for k in sorted(mu):
    pts = [(num(r["delta"]), num(r["U"])) for r in data if int(r["k"]) == k]
    d, u = zip(*pts)
    line, = ax.semilogy(d, u, "o-", ms=3, label=f"k={k}")
    ax.semilogy(d, [u[0] * math.exp(-mu[k] * x) for x in d], "--", color=line.get_color())
ax.set_xlabel(r"$\delta$")
ax.set_ylabel(r"$U_k(\delta)$")
ax.legend(fontsize=8)
save(fig, "plot_profiles")
"#;

const LOCALIZATION: &str = r#"
import glob

for path in sorted(glob.glob(os.path.join(HERE, "localization_k*.csv"))):
    name = os.path.basename(path)
    data = [r for r in rows(name) if r["B"] != ""]
    x = [num(r["x"]) for r in data]
    y = [num(r["y"]) for r in data]
    b = [max(num(r["B"]), 1e-16) for r in data]
    fig, ax = plt.subplots(figsize=(5.5, 5))
    sc = ax.scatter(x, y, c=b, s=2, cmap="viridis", norm=LogNorm())
    fig.colorbar(sc, ax=ax, label=r"$B_k$")
    ax.set_aspect("equal")
    ax.set_title(name[:-4])
    save(fig, "plot_" + name[:-4])
    plt.close(fig)
"#;

const AK: &str = r#"
data = rows("ak.csv")
fig, ax = plt.subplots(figsize=(6, 4.5))
for p in sorted({num(r["p"]) for r in data}):
    pts = [(int(r["k"]), max(num(r["abs_ak"]), 1e-17)) for r in data if num(r["p"]) == p]
    k, a = zip(*pts)
    ax.semilogy(k, a, "o", ms=4, label=f"p={p:.3g}")
ax.axhline(1e-3, color="gray", lw=0.8)
ax.set_xlabel("k")
ax.set_ylabel(r"$|A_k|$")
ax.legend(fontsize=8)
save(fig, "plot_ak")
"#;

const CK: &str = r#"
data = rows("ck.csv")
k = [int(r["k"]) for r in data]
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(k, [num(r["c_conjecture"]) for r in data], "ks", mfc="none", label="conjecture")
ax.plot(k, [num(r["c_numeric"]) for r in data], "r.", label="numeric")
ax.set_xlabel("k")
ax.set_ylabel(r"$c_k$")
ax.legend()
save(fig, "plot_ck")
"#;

const SPECTRUM: &str = r#"
data = rows("spectrum.csv")
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot([int(r["k"]) for r in data], [num(r["mu"]) for r in data], "o")
ax.set_xlabel("k")
ax.set_ylabel(r"$\mu_k$")
save(fig, "plot_spectrum")
"#;

const VALIDATION: &str = r#"
for name in ("validate_disk.csv", "validate_rect.csv"):
    if not os.path.exists(os.path.join(HERE, name)):
        continue
    data = rows(name)
    k = [int(r["k"]) for r in data]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(k, [num(r["abs_err"]) for r in data], "o-", label="eigenvalue error")
    ax.semilogy(k, [num(r["rmse"]) for r in data], "s-", label="eigenfunction RMSE")
    ax.set_xlabel("k")
    ax.legend()
    save(fig, "plot_" + name[:-4])
    plt.close(fig)
"#;

const NORMS: &str = r#"
data = [r for r in rows("norms.csv") if r["tracked"] == "true"]
k = [int(r["k"]) for r in data]
fig, ax = plt.subplots(figsize=(6, 4.5))
for col in ("energy_residual", "volume_residual", "gradient_residual"):
    ax.semilogy(k, [max(abs(num(r[col])), 1e-17) for r in data], "o-", label=col)
ax.set_xlabel("k")
ax.legend()
save(fig, "plot_norms")
"#;

const GREEN: &str = r#"
data = rows("green.csv")
k = [int(r["k"]) for r in data]
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.semilogy(k, [max(num(r["abs_diff"]), 1e-17) for r in data], "o-")
ax.set_xlabel("k")
ax.set_ylabel(r"$|\mu_k^{green} - \mu_k^{fem}|$")
save(fig, "plot_green")
"#;

/// Script name, body, and the files it needs.
const SCRIPTS: &[(&str, &str, &[&str])] = &[
    ("plot_sweep.py", SWEEP, &["sweep.csv", "sweep_meta.csv"]),
    ("plot_profiles.py", PROFILES, &["profiles.csv", "profile_modes.csv"]),
    ("plot_localization.py", LOCALIZATION, &["localization_k*.csv"]),
    ("plot_ak.py", AK, &["ak.csv"]),
    ("plot_ck.py", CK, &["ck.csv"]),
    ("plot_spectrum.py", SPECTRUM, &["spectrum.csv"]),
    ("plot_validation.py", VALIDATION, &["validate_disk.csv|validate_rect.csv"]),
    ("plot_norms.py", NORMS, &["norms.csv"]),
    ("plot_green.py", GREEN, &["green.csv"]),
];

fn present(dir: &Path, pattern: &str) -> std::io::Result<bool> {
    if let Some(prefix) = pattern.strip_suffix("*.csv") {
        for entry in std::fs::read_dir(dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if name.starts_with(prefix) && name.ends_with(".csv") {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    Ok(pattern.split('|').any(|name| dir.join(name).is_file()))
}

/// Writes a script for every complete set of inputs in `dir` and returns
/// their names.
pub fn emit(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    for (name, body, inputs) in SCRIPTS {
        let mut ok = true;
        for pattern in inputs.iter() {
            ok &= present(dir, pattern).map_err(CliError::Io)?;
        }
        if ok {
            std::fs::write(dir.join(name), format!("{PRELUDE}{body}")).map_err(CliError::Io)?;
            written.push(name.to_string());
        }
    }
    if written.is_empty() {
        let expected: Vec<&str> = SCRIPTS.iter().flat_map(|(_, _, i)| i.iter().copied()).collect();
        return Err(CliError::MissingInput(format!(
            "no plottable CSVs in {}; expected any of: {}",
            dir.display(),
            expected.join(", ")
        )));
    }
    Ok(written)
}
