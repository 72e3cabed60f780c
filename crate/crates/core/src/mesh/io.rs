//! Line-oriented text mesh format.
//!
//! ```text
//! nodes <N_i> <N_e>
//! <x> <y>                  (N_i interior nodes, then N_e boundary nodes)
//! triangles <T>
//! <a> <b> <c>
//! boundary_edges <E>
//! <a> <b>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{validate_mesh, Mesh, ValidationOptions, Violation};
use crate::geometry::Point;
use crate::{Error, Result};

pub fn export_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    read_mesh(File::open(path)?)
}

/// Writes coordinates with 17 significant digits, enough to round-trip
/// every `f64` exactly.
pub fn write_mesh(mesh: &Mesh, w: &mut impl Write) -> Result<()> {
    writeln!(w, "nodes {} {}", mesh.n_interior, mesh.n_boundary)?;
    for p in &mesh.nodes {
        writeln!(w, "{:.16e} {:.16e}", p.x, p.y)?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary_edges {}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {}", e[0], e[1])?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            let text = self.inner.next().ok_or_else(|| self.err("unexpected end of file"))??;
            let fields: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
            if !fields.is_empty() {
                return Ok(fields);
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MeshFormat { line: self.line, msg: msg.into() }
    }

    fn header(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let f = self.next()?;
        if f.len() != n + 1 || f[0] != key {
            return Err(self.err(format!("expected `{key}` with {n} count(s)")));
        }
        f[1..].iter().map(|s| self.parse(s)).collect()
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn row<T: std::str::FromStr + Copy + Default, const N: usize>(&mut self) -> Result<[T; N]> {
        let f = self.next()?;
        if f.len() != N {
            return Err(self.err(format!("expected {N} fields, got {}", f.len())));
        }
        let mut out = [T::default(); N];
        for (o, s) in out.iter_mut().zip(&f) {
            *o = self.parse(s)?;
        }
        Ok(out)
    }
}

/// Parses a mesh and rejects structural defects: out-of-range indices,
/// inverted triangles, non-conforming edges and ordering violations.
/// Element quality is not checked here.
pub fn read_mesh(r: impl Read) -> Result<Mesh> {
    let mut lines = Lines { inner: BufReader::new(r).lines(), line: 0 };
    let counts = lines.header("nodes", 2)?;
    let (ni, ne) = (counts[0], counts[1]);
    let mut nodes = Vec::with_capacity(ni + ne);
    for _ in 0..ni + ne {
        let [x, y] = lines.row::<f64, 2>()?;
        if !x.is_finite() || !y.is_finite() {
            return Err(lines.err("non-finite coordinate"));
        }
        nodes.push(Point::new(x, y));
    }
    let nt = lines.header("triangles", 1)?[0];
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        triangles.push(lines.row::<usize, 3>()?);
    }
    let nbe = lines.header("boundary_edges", 1)?[0];
    let mut boundary_edges = Vec::with_capacity(nbe);
    for _ in 0..nbe {
        boundary_edges.push(lines.row::<usize, 2>()?);
    }

    let n = nodes.len();
    if let Some(t) = triangles.iter().find(|t| t.iter().any(|&v| v >= n)) {
        return Err(Error::InvalidMesh(format!("triangle {t:?} references a node >= {n}")));
    }
    if let Some(e) = boundary_edges.iter().find(|e| e.iter().any(|&v| v >= n)) {
        return Err(Error::InvalidMesh(format!("boundary edge {e:?} references a node >= {n}")));
    }
    let mesh = Mesh::new(nodes, ni, triangles, boundary_edges);
    let opts = ValidationOptions { h_max: Some(f64::INFINITY), min_angle_deg: 0.0, ..Default::default() };
    let structural: Vec<Violation> = validate_mesh(&mesh, &opts)
        .into_iter()
        .filter(|v| !matches!(v, Violation::Quality { .. } | Violation::EdgeTooLong { .. }))
        .collect();
    if let Some(v) = structural.first() {
        return Err(Error::InvalidMesh(format!("{} structural violation(s), first: {v:?}", structural.len())));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "nodes 0 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\n\
                          boundary_edges 4\n0 1\n1 2\n2 3\n3 0\n";

    #[test]
    fn parses_minimal_file() {
        let m = read_mesh(SQUARE.as_bytes()).unwrap();
        assert_eq!(m.n_boundary, 4);
        assert_eq!(m.triangles.len(), 2);
    }

    #[test]
    fn rejects_out_of_range_triangle() {
        let bad = SQUARE.replace("0 2 3", "0 2 4");
        assert!(matches!(read_mesh(bad.as_bytes()), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_dangling_boundary_edge() {
        let bad = SQUARE.replace("boundary_edges 4", "boundary_edges 5") + "1 3\n";
        assert!(read_mesh(bad.as_bytes()).is_err());
    }

    #[test]
    fn reports_line_of_bad_number() {
        let bad = SQUARE.replace("1 1", "1 x");
        match read_mesh(bad.as_bytes()) {
            Err(Error::MeshFormat { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
