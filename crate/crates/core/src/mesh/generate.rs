use std::collections::{HashMap, HashSet};

use spade::handles::{FixedFaceHandle, InnerTag};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{Mesh, MIN_ANGLE_DEG};
use crate::geometry::{Domain, Point};
use crate::{Error, Result};

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

/// Working edge bounds relative to the requested `h`, tried in order until
/// the projection of curved boundary nodes keeps every edge within `h`.
const SAFETY: [f64; 4] = [0.98, 0.95, 0.9, 0.8];
const MAX_SPLIT_ROUNDS: usize = 50;

/// Meshes `domain` with every edge no longer than `h`.
///
/// The boundary is sampled at spacing `<= h` (all polygon corners
/// included), the interior is seeded with an equilateral lattice, and the
/// constrained Delaunay triangulation is refined to the angle floor.
/// Interior edges that are still too long are bisected until none remain.
pub fn generate_mesh(domain: &Domain, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
    }
    let mut longest = f64::NAN;
    for s in SAFETY {
        let mesh = mesh_with_target(domain, s * h)?;
        if mesh.h_max <= h {
            return Ok(mesh);
        }
        longest = mesh.h_max;
    }
    Err(Error::Meshing(format!("longest edge {longest} exceeds h = {h} after boundary projection")))
}

fn mesh_with_target(domain: &Domain, target: f64) -> Result<Mesh> {
    let boundary = domain.boundary_points(target)?;
    let nb = boundary.len();

    let spacing = 0.85 * target;
    let mut vertices: Vec<Point2<f64>> = boundary.iter().map(|p| Point2::new(p.x, p.y)).collect();
    vertices.extend(lattice(domain, spacing).into_iter().map(|p| Point2::new(p.x, p.y)));
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();

    let mut cdt =
        Cdt::bulk_load_cdt(vertices, edges).map_err(|e| Error::Meshing(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() < nb {
        return Err(Error::Meshing("boundary samples collapsed".into()));
    }

    let mut excluded = refine(&mut cdt, target)?;
    for round in 0.. {
        let long = long_interior_edges(&cdt, &excluded, target);
        if long.is_empty() {
            break;
        }
        if round == MAX_SPLIT_ROUNDS {
            return Err(Error::Meshing(format!(
                "{} edges still longer than {target} after {round} rounds",
                long.len()
            )));
        }
        for p in long {
            cdt.insert(p).map_err(|e| Error::Meshing(format!("insertion failed: {e:?}")))?;
        }
        excluded = refine(&mut cdt, target)?;
    }

    extract(&cdt, &excluded, domain, nb)
}

fn refine(cdt: &mut Cdt, target: f64) -> Result<HashSet<FixedFaceHandle<InnerTag>>> {
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG + 0.5))
        .with_max_allowed_area(3f64.sqrt() / 4.0 * target * target)
        .exclude_outer_faces(true)
        .with_max_additional_vertices(cdt.num_vertices() * 20 + 1000);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::Meshing("refinement did not converge".into()));
    }
    Ok(result.excluded_faces.into_iter().collect())
}

/// Equilateral lattice points inside the domain, kept away from the boundary.
fn lattice(domain: &Domain, s: f64) -> Vec<Point> {
    let (lo, hi) = domain.bounding_box();
    let dy = s * 3f64.sqrt() / 2.0;
    let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
    let cols = ((hi.x - lo.x) / s).ceil() as usize + 2;
    let mut out = Vec::new();
    for r in 0..rows {
        let y = lo.y + (r as f64 + 0.5) * dy;
        let shift = if r % 2 == 0 { 0.25 } else { 0.75 };
        for c in 0..cols {
            let p = Point::new(lo.x + (c as f64 - 0.5 + shift) * s, y);
            if domain.contains(p) && domain.distance_to_boundary(p) > 0.5 * s {
                out.push(p);
            }
        }
    }
    out
}

fn is_kept(face: Option<FixedFaceHandle<InnerTag>>, excluded: &HashSet<FixedFaceHandle<InnerTag>>) -> bool {
    face.is_some_and(|f| !excluded.contains(&f))
}

fn long_interior_edges(cdt: &Cdt, excluded: &HashSet<FixedFaceHandle<InnerTag>>, target: f64) -> Vec<Point2<f64>> {
    let t2 = target * target;
    cdt.undirected_edges()
        .filter(|e| !e.is_constraint_edge() && e.length_2() > t2)
        .filter(|e| {
            let d = e.as_directed();
            is_kept(d.face().fix().as_inner(), excluded) && is_kept(d.rev().face().fix().as_inner(), excluded)
        })
        .map(|e| {
            let [a, b] = e.positions();
            Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
        })
        .collect()
}

/// Collects kept triangles, orders boundary nodes counterclockwise from the
/// first boundary sample, and renumbers nodes interior-first.
fn extract(cdt: &Cdt, excluded: &HashSet<FixedFaceHandle<InnerTag>>, domain: &Domain, nb_input: usize) -> Result<Mesh> {
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let v = f.vertices();
        tris.push([v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]);
    }
    if tris.is_empty() {
        return Err(Error::Meshing("no triangles inside the domain".into()));
    }

    let mut directed = HashSet::with_capacity(tris.len() * 3);
    for t in &tris {
        for i in 0..3 {
            directed.insert((t[i], t[(i + 1) % 3]));
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) && next.insert(a, b).is_some() {
            return Err(Error::Meshing(format!("boundary is not a simple loop at vertex {a}")));
        }
    }
    // Input vertex 0 is the first boundary sample (a polygon corner).
    debug_assert!(nb_input > 0 && next.contains_key(&0));
    let mut loop_nodes = vec![0usize];
    let mut cur =
        *next.get(&0).ok_or_else(|| Error::Meshing("first boundary sample is not on the mesh boundary".into()))?;
    while cur != 0 {
        loop_nodes.push(cur);
        if loop_nodes.len() > next.len() {
            return Err(Error::Meshing("boundary walk did not close".into()));
        }
        cur = next[&cur];
    }
    if loop_nodes.len() != next.len() {
        return Err(Error::Meshing(format!(
            "mesh boundary has {} edges but the outer loop only {}",
            next.len(),
            loop_nodes.len()
        )));
    }

    let used: HashSet<usize> = tris.iter().flatten().copied().collect();
    let on_boundary: HashSet<usize> = loop_nodes.iter().copied().collect();
    let mut interior: Vec<usize> = used.iter().copied().filter(|v| !on_boundary.contains(v)).collect();
    interior.sort_unstable();

    let mut renumber = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes = Vec::with_capacity(used.len());
    let positions: Vec<Point> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            Point::new(p.x, p.y)
        })
        .collect();
    for &v in &interior {
        renumber[v] = nodes.len();
        nodes.push(positions[v]);
    }
    let smooth = !domain.is_polygon();
    for &v in &loop_nodes {
        renumber[v] = nodes.len();
        let p = positions[v];
        nodes.push(if smooth { domain.project_to_boundary(p) } else { p });
    }
    let n_interior = interior.len();
    let triangles = tris.iter().map(|t| [renumber[t[0]], renumber[t[1]], renumber[t[2]]]).collect();
    let nb = loop_nodes.len();
    let boundary_edges = (0..nb).map(|i| [n_interior + i, n_interior + (i + 1) % nb]).collect();
    Ok(Mesh::new(nodes, n_interior, triangles, boundary_edges))
}
