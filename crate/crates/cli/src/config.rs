//! Run configuration: command-line flags merged over an optional JSON file.

use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use steklov::analysis;
use steklov::greens;
use steklov::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a mesh and export it.
    Mesh,
    /// DtN eigenvalues with either method.
    Solve,
    /// FEM against the Bessel solution on a disk.
    ValidateDisk,
    /// FEM against the separable solution on a rectangle.
    ValidateRect,
    /// Eigenvalues over a logarithmic grid of p.
    Sweep,
    /// Large-p prefactors against the corner conjecture.
    Ck,
    /// Projections of the constant onto each eigenfunction.
    Ak,
    /// Localization maps and radial decay profiles.
    Localize,
    /// Energy identities of the eigenpairs.
    Norms,
    /// Green's-function method compared with the Schur complement.
    GreenSolve,
    /// Plot scripts for the CSVs found in the output directory.
    EmitPlots,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Solve => "solve",
            Command::ValidateDisk => "validate-disk",
            Command::ValidateRect => "validate-rect",
            Command::Sweep => "sweep",
            Command::Ck => "ck",
            Command::Ak => "ak",
            Command::Localize => "localize",
            Command::Norms => "norms",
            Command::GreenSolve => "green-solve",
            Command::EmitPlots => "emit-plots",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fem,
    Green,
}

#[derive(Parser, Debug)]
#[command(name = "steklov", version, about = "Dirichlet-to-Neumann spectra of planar domains")]
pub struct Cli {
    /// Command to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub flags: Flags,
}

/// Every flag is optional so that it can override a config file.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// JSON file holding any of these settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Config files may name the command instead of the command line.
    #[arg(skip)]
    pub command: Option<Command>,
    /// Shorthand (`disk:R=1`, `koch:g=1`, `poly:file=x.json`, ...) or a
    /// JSON object tagged by `"shape"`.
    #[arg(long)]
    #[serde(deserialize_with = "string_or_object")]
    pub domain: Option<String>,
    /// Read this mesh instead of generating one.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Explicit comma-separated p values.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub p_points: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Mode indices for `localize` and `norms`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub b1: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Pass/fail tolerance of the validation commands.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Bin width of the radial profiles; defaults to `h`.
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub dp: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    #[arg(long, env = "STEKLOV_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long)]
    #[serde(skip)]
    pub sequential: bool,
}

/// Config files may give the domain as a string or as an inline object.
fn string_or_object<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(match serde_json::Value::deserialize(d)? {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s),
        other => Some(other.to_string()),
    })
}

impl Flags {
    /// Fields set in `self` win over those in `base`.
    fn over(self, base: Flags) -> Flags {
        macro_rules! pick {
            ($($f:ident),*) => { Flags { $($f: self.$f.or(base.$f),)* sequential: self.sequential || base.sequential } };
        }
        pick!(
            config, command, domain, mesh, h, p, p_grid, p_min, p_max, p_points, count, method, q, m, k, b1, b2,
            radius, tol, width, dp, out, threads
        )
    }
}

/// Validated settings of one run; echoed verbatim into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    /// Absent only for `emit-plots`.
    pub domain: Option<DomainSpec>,
    pub mesh: Option<PathBuf>,
    pub h: f64,
    pub p: f64,
    pub p_grid: Vec<f64>,
    pub count: usize,
    pub method: Method,
    pub q: f64,
    pub m: usize,
    pub k: Vec<usize>,
    pub tol: f64,
    pub width: f64,
    pub dp: f64,
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub sequential: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, ConfigError> {
        let mut flags = cli.flags;
        if let Some(path) = flags.config.clone() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
            let file: Flags =
                serde_json::from_str(&text).map_err(|e| bad(format!("bad config {}: {e}", path.display())))?;
            flags = flags.over(file);
        }
        let command = cli
            .command
            .or(flags.command)
            .ok_or_else(|| bad("no command given on the command line or in the config file"))?;
        Self::resolve(command, flags)
    }

    fn resolve(command: Command, f: Flags) -> Result<Self, ConfigError> {
        let domain = match (command, &f.domain) {
            (Command::EmitPlots, _) => None,
            (_, Some(s)) => Some(s.parse::<DomainSpec>().map_err(|e| bad(e.to_string()))?),
            (Command::ValidateDisk, None) => Some(DomainSpec::Disk { radius: f.radius.unwrap_or(1.0) }),
            (Command::ValidateRect, None) => {
                Some(DomainSpec::Rectangle { b1: f.b1.unwrap_or(1.0), b2: f.b2.unwrap_or(2.0) })
            }
            (_, None) => return Err(bad(format!("`{}` needs --domain", command.name()))),
        };
        match (command, &domain) {
            (Command::ValidateDisk, Some(DomainSpec::Disk { .. }))
            | (Command::ValidateRect, Some(DomainSpec::Rectangle { .. })) => {}
            (Command::ValidateDisk | Command::ValidateRect, Some(d)) => {
                return Err(bad(format!("`{}` does not apply to {d:?}", command.name())))
            }
            _ => {}
        }

        let large_p = matches!(command, Command::Ck);
        let p = f.p.unwrap_or(if large_p { steklov::conjecture::DEFAULT_P } else { 1.0 });
        let h = f.h.unwrap_or(0.05);
        let p_grid = match (&f.p_grid, command) {
            (Some(g), _) => g.clone(),
            (None, Command::Sweep) => {
                analysis::log_grid(f.p_min.unwrap_or(1e-2), f.p_max.unwrap_or(1e3), f.p_points.unwrap_or(26))
                    .map_err(|e| bad(e.to_string()))?
            }
            (None, _) => vec![p],
        };
        let default_count = match command {
            Command::Ck => 18,
            Command::Ak => 21,
            _ => 11,
        };
        let count = f.count.unwrap_or(default_count);
        let k = f.k.clone().unwrap_or_else(|| match command {
            Command::Localize => vec![count.saturating_sub(1)],
            _ => (0..count).collect(),
        });
        let cfg = RunConfig {
            command,
            domain,
            mesh: f.mesh,
            h,
            p,
            p_grid,
            count,
            method: f.method.unwrap_or(if command == Command::GreenSolve { Method::Green } else { Method::Fem }),
            q: f.q.unwrap_or(greens::DEFAULT_Q),
            m: f.m.unwrap_or(greens::DEFAULT_M),
            k,
            tol: f.tol.unwrap_or(if command == Command::Ck { 1e-2 } else { 5e-3 }),
            width: f.width.unwrap_or(h),
            dp: f.dp.unwrap_or_else(|| analysis::default_dp(p)),
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: f.threads,
            sequential: f.sequential,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("--{name} must be positive, got {v}")))
            }
        };
        positive("h", self.h)?;
        positive("tol", self.tol)?;
        positive("width", self.width)?;
        positive("dp", self.dp)?;
        positive("q", self.q)?;
        if !(self.p.is_finite() && self.p >= 0.0) {
            return Err(bad(format!("--p must be >= 0, got {}", self.p)));
        }
        if self.count == 0 {
            return Err(bad("--count must be >= 1"));
        }
        if self.m < self.count {
            return Err(bad(format!("--m ({}) must be at least --count ({})", self.m, self.count)));
        }
        if self.p_grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(bad("p grid values must be finite and >= 0"));
        }
        if self.command == Command::Sweep
            && (self.p_grid.iter().any(|&p| p <= 0.0) || self.p_grid.windows(2).any(|w| w[1] <= w[0]))
        {
            return Err(bad("sweep grid must be positive and strictly increasing"));
        }
        if matches!(self.command, Command::Localize | Command::Norms) {
            if self.k.is_empty() {
                return Err(bad("--k must list at least one mode"));
            }
        }
        Ok(())
    }

    pub fn execution(&self) -> steklov::par::Execution {
        if self.sequential {
            steklov::par::Execution::Sequential
        } else {
            steklov::par::Execution::Parallel
        }
    }

    /// Number of modes that must be computed to cover `count` and `k`.
    pub fn modes_needed(&self) -> usize {
        self.k.iter().map(|k| k + 1).max().unwrap_or(0).max(self.count)
    }
}
