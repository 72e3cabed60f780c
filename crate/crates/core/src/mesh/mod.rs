//! Triangular meshes with interior-first node ordering.
//!
//! Nodes `0..n_interior` are interior, `n_interior..n_nodes` lie on the
//! boundary in counterclockwise order. The Schur-complement construction in
//! [`crate::dtn`] relies on this layout to split `pM + K` into blocks.

mod generate;
mod io;

use std::collections::HashMap;

use crate::geometry::{Domain, Point};

pub use generate::generate_mesh;
pub use io::{export_mesh, import_mesh, read_mesh, write_mesh};

/// Default quality floor for the smallest triangle angle, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Consecutive boundary nodes, counterclockwise along the boundary.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Longest edge of the mesh.
    pub h_max: f64,
}

impl Mesh {
    /// Assembles a mesh and measures `h_max` from its edges.
    pub fn new(
        nodes: Vec<Point>,
        n_interior: usize,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
    ) -> Self {
        let n_boundary = nodes.len() - n_interior;
        let mut m = Mesh { nodes, n_interior, n_boundary, triangles, boundary_edges, h_max: 0.0 };
        m.h_max = m.longest_edge();
        m
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_nodes(&self) -> std::ops::Range<usize> {
        self.n_interior..self.nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node >= self.n_interior
    }

    /// Signed area of triangle `t` (positive when counterclockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * (pb - pa).cross(pc - pa)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|&[a, b]| self.nodes[a].dist(self.nodes[b])).sum()
    }

    /// Every undirected edge once, as `(lo, hi)` node pairs in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::with_capacity(self.triangles.len() * 2);
        let mut out = Vec::with_capacity(self.triangles.len() * 3 / 2 + self.n_boundary);
        for tri in &self.triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }

    pub fn longest_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
            .map(|(a, b)| self.nodes[a].dist(self.nodes[b]))
            .fold(0.0, f64::max)
    }

    /// Interior angles of triangle `t` at its three vertices, in radians.
    pub fn triangle_angles(&self, t: usize) -> [f64; 3] {
        let tri = self.triangles[t];
        let mut out = [0.0; 3];
        for i in 0..3 {
            let p = self.nodes[tri[i]];
            let u = self.nodes[tri[(i + 1) % 3]] - p;
            let v = self.nodes[tri[(i + 2) % 3]] - p;
            out[i] = u.cross(v).abs().atan2(u.dot(v));
        }
        out
    }

    /// Interior angle of the boundary at each boundary node, measured
    /// between its two boundary edges (indexed by `node - n_interior`).
    pub fn boundary_turn_angles(&self) -> Vec<f64> {
        let mut prev = vec![usize::MAX; self.n_boundary];
        let mut next = vec![usize::MAX; self.n_boundary];
        for &[a, b] in &self.boundary_edges {
            if self.is_boundary(a) && self.is_boundary(b) {
                next[a - self.n_interior] = b;
                prev[b - self.n_interior] = a;
            }
        }
        (0..self.n_boundary)
            .map(|i| {
                let (p, n) = (prev[i], next[i]);
                if p == usize::MAX || n == usize::MAX {
                    return std::f64::consts::PI;
                }
                let c = self.nodes[self.n_interior + i];
                let u = self.nodes[n] - c;
                let v = self.nodes[p] - c;
                u.cross(v).atan2(u.dot(v)).rem_euclid(2.0 * std::f64::consts::PI)
            })
            .collect()
    }
}

/// Settings for [`validate_mesh`].
#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions<'a> {
    /// Edge-length bound; defaults to the mesh's own `h_max`.
    pub h_max: Option<f64>,
    pub min_angle_deg: f64,
    /// When set, boundary nodes are checked against the true boundary.
    pub domain: Option<&'a Domain>,
    pub boundary_tol: f64,
}

impl Default for ValidationOptions<'_> {
    fn default() -> Self {
        ValidationOptions { h_max: None, min_angle_deg: MIN_ANGLE_DEG, domain: None, boundary_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexOutOfRange {
        triangle: usize,
        node: usize,
    },
    Orientation {
        triangle: usize,
        signed_area: f64,
    },
    /// A triangle angle below the floor. Triangles touching a boundary
    /// corner sharper than the floor, or one of its two boundary
    /// neighbours, are not checked: no triangulation can fix them.
    Quality {
        triangle: usize,
        min_angle_deg: f64,
    },
    EdgeTooLong {
        a: usize,
        b: usize,
        length: f64,
    },
    /// An edge shared by more than two triangles, or a boundary edge that
    /// is not on exactly one triangle.
    Conformity {
        a: usize,
        b: usize,
        count: usize,
    },
    /// An edge on one triangle only that is not a declared boundary edge.
    UndeclaredBoundary {
        a: usize,
        b: usize,
    },
    /// An interior-indexed node on the boundary or vice versa.
    Ordering {
        node: usize,
    },
    OffBoundary {
        node: usize,
        distance: f64,
    },
    Euler {
        value: i64,
    },
}

/// Marks boundary nodes whose boundary angle is below `floor`, together
/// with their neighbours along the boundary.
fn sharp_corner_zone(mesh: &Mesh, floor: f64) -> Vec<bool> {
    let mut zone = vec![false; mesh.n_nodes()];
    let turn = mesh.boundary_turn_angles();
    for &[a, b] in &mesh.boundary_edges {
        let sharp = |v: usize| mesh.is_boundary(v) && turn[v - mesh.n_interior] < floor;
        if sharp(a) || sharp(b) {
            zone[a] = true;
            zone[b] = true;
        }
    }
    zone
}

/// Checks every mesh invariant; an empty list means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh, opts: &ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = mesh.n_nodes();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if let Some(&node) = tri.iter().find(|&&v| v >= n) {
            out.push(Violation::IndexOutOfRange { triangle: t, node });
        }
    }
    for e in &mesh.boundary_edges {
        if let Some(&node) = e.iter().find(|&&v| v >= n) {
            out.push(Violation::IndexOutOfRange { triangle: usize::MAX, node });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let floor = opts.min_angle_deg.to_radians();
    let exempt = sharp_corner_zone(mesh, floor);
    for t in 0..mesh.triangles.len() {
        let a = mesh.signed_area(t);
        if a <= 0.0 {
            out.push(Violation::Orientation { triangle: t, signed_area: a });
            continue;
        }
        if mesh.triangles[t].iter().any(|&v| exempt[v]) {
            continue;
        }
        let worst = mesh.triangle_angles(t).into_iter().fold(f64::INFINITY, f64::min);
        if worst < floor {
            out.push(Violation::Quality { triangle: t, min_angle_deg: worst.to_degrees() });
        }
    }

    let h = opts.h_max.unwrap_or(mesh.h_max);
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut keys: Vec<_> = count.keys().copied().collect();
    keys.sort_unstable();
    let declared: std::collections::HashSet<(usize, usize)> =
        mesh.boundary_edges.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
    for &(a, b) in &keys {
        let len = mesh.nodes[a].dist(mesh.nodes[b]);
        if len > h * (1.0 + 1e-12) {
            out.push(Violation::EdgeTooLong { a, b, length: len });
        }
        let c = count[&(a, b)];
        if c > 2 {
            out.push(Violation::Conformity { a, b, count: c });
        } else if c == 1 && !declared.contains(&(a, b)) {
            out.push(Violation::UndeclaredBoundary { a, b });
        }
    }
    for &[a, b] in &mesh.boundary_edges {
        let c = count.get(&(a.min(b), a.max(b))).copied().unwrap_or(0);
        if c != 1 {
            out.push(Violation::Conformity { a, b, count: c });
        }
        for v in [a, b] {
            if !mesh.is_boundary(v) {
                out.push(Violation::Ordering { node: v });
            }
        }
    }
    let on_boundary: std::collections::HashSet<usize> = mesh.boundary_edges.iter().flatten().copied().collect();
    for v in mesh.boundary_nodes() {
        if !on_boundary.contains(&v) {
            out.push(Violation::Ordering { node: v });
        }
    }

    if let Some(domain) = opts.domain {
        for v in mesh.boundary_nodes() {
            let d = domain.distance_to_boundary(mesh.nodes[v]);
            if d > opts.boundary_tol {
                out.push(Violation::OffBoundary { node: v, distance: d });
            }
        }
    }

    let euler = n as i64 - keys.len() as i64 + mesh.triangles.len() as i64;
    if euler != 1 {
        out.push(Violation::Euler { value: euler });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Mesh {
        // Unit square split along a diagonal; all four nodes on the boundary.
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        Mesh::new(nodes, 0, vec![[0, 1, 2], [0, 2, 3]], vec![[0, 1], [1, 2], [2, 3], [3, 0]])
    }

    #[test]
    fn valid_square_passes() {
        let m = two_triangles();
        assert!(validate_mesh(&m, &ValidationOptions::default()).is_empty());
        assert!((m.area() - 1.0).abs() < 1e-15);
        assert_eq!(m.edges().len(), 5);
    }

    #[test]
    fn flipped_triangle_reported() {
        let mut m = two_triangles();
        m.triangles[1] = [0, 3, 2];
        let v = validate_mesh(&m, &ValidationOptions::default());
        assert!(v.iter().any(|x| matches!(x, Violation::Orientation { triangle: 1, .. })));
    }

    #[test]
    fn skinny_triangle_reported() {
        let t = 5f64.to_radians().tan();
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.5, 0.5 * t)];
        let m = Mesh::new(nodes, 0, vec![[0, 1, 2]], vec![[0, 1], [1, 2], [2, 0]]);
        let v = validate_mesh(&m, &ValidationOptions::default());
        // Every node of a lone sliver is in the zone of its own sharp corners.
        assert!(v.is_empty(), "{v:?}");
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.5, 0.5 * t), Point::new(0.5, -1.0)];
        let m = Mesh::new(nodes, 0, vec![[0, 3, 1], [0, 1, 2]], vec![[0, 3], [3, 1], [1, 2], [2, 0]]);
        let v = validate_mesh(&m, &ValidationOptions::default());
        assert!(v.iter().any(|x| matches!(x, Violation::Quality { triangle: 1, .. })));
    }
}
