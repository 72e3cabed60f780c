//! CSV and nodal-vector writers. Reals are written with 17 significant
//! digits so that every value round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dtn::Spectrum;
use crate::Result;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => f.write_str(&fmt_real(*v)),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Writes a header line and rows of cells.
pub fn write_csv<W: Write>(w: &mut W, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_csv_file(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<Cell>>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, header, rows)?;
    w.flush()?;
    Ok(())
}

/// `k, mu` rows.
pub fn write_spectrum<W: Write>(w: &mut W, spectrum: &Spectrum) -> Result<()> {
    write_csv(w, &["k", "mu"], spectrum.mu.iter().enumerate().map(|(k, &mu)| vec![k.into(), mu.into()]))
}

/// One value per line, in mesh node order.
pub fn write_node_vector<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        writeln!(w, "{}", fmt_real(v))?;
    }
    Ok(())
}
