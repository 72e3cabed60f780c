//! `report.json` and the error record.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use steklov::{Domain, Mesh};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct DomainMetrics {
    pub area: f64,
    pub perimeter: f64,
    pub area_over_perimeter: f64,
    /// Interior corner angles of polygonal domains, in traversal order.
    pub corner_angles: Vec<f64>,
}

impl DomainMetrics {
    pub fn of(d: &Domain) -> Self {
        DomainMetrics {
            area: d.area(),
            perimeter: d.perimeter(),
            area_over_perimeter: d.ratio_area_perimeter(),
            corner_angles: d.corners().iter().map(|c| c.angle).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MeshMetrics {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_triangles: usize,
    pub h_max: f64,
}

impl MeshMetrics {
    pub fn of(m: &Mesh) -> Self {
        MeshMetrics {
            n_interior: m.n_interior,
            n_boundary: m.n_boundary,
            n_triangles: m.triangles.len(),
            h_max: m.longest_edge(),
        }
    }
}

/// Wall-clock seconds per phase, in the order the phases ran.
#[derive(Debug, Default, Serialize)]
pub struct Timings(Vec<(String, f64)>);

impl Timings {
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.push((phase.to_owned(), t.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub workers: usize,
    pub domain: Option<DomainMetrics>,
    pub mesh: Option<MeshMetrics>,
    pub timings: Timings,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub passed: Option<bool>,
    pub files: Vec<String>,
    pub results: Value,
}

impl Report<'_> {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("report.json"), text + "\n")
    }
}

/// Machine-readable failure record, printed to stderr and, when possible,
/// written as `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
}
