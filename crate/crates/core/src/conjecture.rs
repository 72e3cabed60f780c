//! Effective-angle prediction of the large-`p` prefactors `c_k` in
//! `μ_k ≃ c_k √p` for polygons, and its comparison with computed spectra.
//!
//! Starting from the corner angles `a = (α_0, …, α_{N-1})`, step `k` takes
//! the smallest effective angle `a_j < π`, sets `c_k = sin(a_j / 2)` and
//! replaces `a_j` by `a_j + 2α_j`. Once every effective angle reaches `π`,
//! all further coefficients are 1.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::dtn::Spectrum;
use crate::geometry::Domain;
use crate::output::{write_csv, Cell};
use crate::{Error, Result};

/// Effective angles closer than this are tied.
pub const TIE_TOL: f64 = 1e-9;

/// Default `p` for extracting `c_k = μ_k / √p`.
pub const DEFAULT_P: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveStep {
    /// Effective angles before the update of this step.
    pub effective: Vec<f64>,
    /// Slot that was incremented, `None` once every slot is at least `π`.
    pub chosen: Option<usize>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveAngleTrace {
    pub angles: Vec<f64>,
    pub steps: Vec<EffectiveStep>,
}

impl EffectiveAngleTrace {
    pub fn coefficients(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.c).collect()
    }
}

fn is_active(a: f64) -> bool {
    a < PI - TIE_TOL
}

/// Runs `steps` steps of the effective-angle procedure.
///
/// Among tied minima the slot with the largest increment `2α_i` wins, then
/// the lowest index. Slots at or above `π` are never selected.
pub fn effective_angle_sequence(angles: &[f64], steps: usize) -> Result<EffectiveAngleTrace> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("no corner angles".into()));
    }
    if let Some(a) = angles.iter().find(|&&a| !(a > 0.0 && a < 2.0 * PI)) {
        return Err(Error::InvalidArgument(format!("corner angle {a} outside (0, 2π)")));
    }
    let mut eff = angles.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let min = eff.iter().copied().filter(|&a| is_active(a)).fold(f64::INFINITY, f64::min);
        if min.is_infinite() {
            out.push(EffectiveStep { effective: eff.clone(), chosen: None, c: 1.0 });
            continue;
        }
        let chosen = (0..eff.len())
            .filter(|&i| is_active(eff[i]) && eff[i] <= min + TIE_TOL)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if angles[b] >= angles[i] - TIE_TOL => Some(b),
                _ => Some(i),
            })
            .expect("an active slot attains the minimum");
        out.push(EffectiveStep { effective: eff.clone(), chosen: Some(chosen), c: (min.min(PI) / 2.0).sin() });
        eff[chosen] += 2.0 * angles[chosen];
    }
    Ok(EffectiveAngleTrace { angles: angles.to_vec(), steps: out })
}

/// Numerical prefactors `μ_k / √p`.
pub fn extract_ck(spectrum: &Spectrum) -> Result<Vec<f64>> {
    if !(spectrum.p > 0.0) {
        return Err(Error::InvalidArgument(format!("c_k needs p > 0, got {}", spectrum.p)));
    }
    let s = spectrum.p.sqrt();
    Ok(spectrum.mu.iter().map(|m| m / s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureRow {
    pub k: usize,
    pub effective: Vec<f64>,
    pub c_conjecture: f64,
    pub c_numeric: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub p: f64,
    pub rows: Vec<ConjectureRow>,
}

impl ConjectureReport {
    /// Pairs a trace with numerical coefficients; `tolerance(k)` sets the
    /// flagging threshold of row `k`.
    pub fn new(p: f64, trace: &EffectiveAngleTrace, numeric: &[f64], tolerance: impl Fn(usize) -> f64) -> Self {
        let rows = trace
            .steps
            .iter()
            .zip(numeric)
            .enumerate()
            .map(|(k, (step, &c_numeric))| {
                let abs_diff = (step.c - c_numeric).abs();
                let tol = tolerance(k);
                ConjectureRow {
                    k,
                    effective: step.effective.clone(),
                    c_conjecture: step.c,
                    c_numeric,
                    abs_diff,
                    tolerance: tol,
                    flagged: abs_diff > tol,
                }
            })
            .collect();
        ConjectureReport { p, rows }
    }

    pub fn max_abs_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.flagged).map(|r| r.k).collect()
    }

    /// `k, c_conjecture, c_numeric, abs_diff` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_csv(
            w,
            &["k", "c_conjecture", "c_numeric", "abs_diff"],
            self.rows
                .iter()
                .map(|r| vec![Cell::from(r.k), r.c_conjecture.into(), r.c_numeric.into(), r.abs_diff.into()]),
        )
    }

    /// Fixed-width table with effective angles in units of `π`.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "{:>3}  {:<48} {:>8} {:>8} {:>8}", "k", "effective angles / π", "conj", "numeric", "diff");
        for r in &self.rows {
            let eff: Vec<String> = r.effective.iter().map(|a| format!("{:.3}", a / PI)).collect();
            let _ = writeln!(
                s,
                "{:>3}  {:<48} {:>8.4} {:>8.4} {:>8.4}{}",
                r.k,
                eff.join(" "),
                r.c_conjecture,
                r.c_numeric,
                r.abs_diff,
                if r.flagged { "  *" } else { "" }
            );
        }
        s
    }
}

/// Runs `solver` on `domain` at `p` and compares the first `count`
/// coefficients with the effective-angle prediction.
pub fn compare_conjecture(
    domain: &Domain,
    p: f64,
    count: usize,
    tolerance: impl Fn(usize) -> f64,
    solver: impl FnOnce(&Domain, f64, usize) -> Result<Spectrum>,
) -> Result<ConjectureReport> {
    let angles = domain.polygon_angle_sequence()?;
    let trace = effective_angle_sequence(&angles, count)?;
    let spectrum = solver(domain, p, count)?;
    let numeric = extract_ck(&spectrum)?;
    Ok(ConjectureReport::new(p, &trace, &numeric, tolerance))
}
