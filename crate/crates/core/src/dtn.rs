//! Discrete Dirichlet-to-Neumann operator as a Schur complement, its
//! spectrum, and harmonic extension of boundary eigenvectors.
//!
//! With `A = pM + K` split into unknown nodes `u` (interior, plus Neumann
//! nodes for mixed problems) and Steklov nodes `s`,
//!
//! ```text
//! S = A_ss - A_su A_uu⁻¹ A_us
//! ```
//!
//! and the eigenpairs of `M_p` are those of the pencil `S v = μ M_b v`.

use std::ops::Range;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::eigen::generalized_eigh;
use crate::fem::{FemMatrices, InteriorFactor};
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::par::{map_range, Execution};
use crate::{Error, Result};

/// Right-hand sides per Schur block. Each block is an independent task.
const SCHUR_BLOCK: usize = 32;

/// Eigenvalues closer than `DEGENERACY_TOL · max(1, μ)` form one multiplet.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRole {
    Steklov,
    DirichletZero,
    NeumannZero,
}

/// Role of every boundary node, indexed like the boundary block of the mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPartition {
    roles: Vec<BoundaryRole>,
}

impl BoundaryPartition {
    /// Steklov condition on the whole boundary.
    pub fn steklov(n_boundary: usize) -> Self {
        BoundaryPartition { roles: vec![BoundaryRole::Steklov; n_boundary] }
    }

    pub fn from_roles(roles: Vec<BoundaryRole>) -> Result<Self> {
        if !roles.contains(&BoundaryRole::Steklov) {
            return Err(Error::InvalidArgument("boundary partition has no Steklov node".into()));
        }
        Ok(BoundaryPartition { roles })
    }

    /// Assigns a role to each boundary node from its position.
    pub fn from_fn(mesh: &Mesh, role: impl Fn(Point) -> BoundaryRole) -> Result<Self> {
        Self::from_roles(mesh.boundary_nodes().map(|i| role(mesh.nodes[i])).collect())
    }

    pub fn roles(&self) -> &[BoundaryRole] {
        &self.roles
    }

    pub fn is_pure_steklov(&self) -> bool {
        self.roles.iter().all(|&r| r == BoundaryRole::Steklov)
    }

    /// Maximal runs of equal role, in boundary order (not merged cyclically).
    pub fn arcs(&self) -> Vec<(Range<usize>, BoundaryRole)> {
        let mut out: Vec<(Range<usize>, BoundaryRole)> = Vec::new();
        for (i, &r) in self.roles.iter().enumerate() {
            match out.last_mut() {
                Some((range, role)) if *role == r => range.end = i + 1,
                _ => out.push((i..i + 1, r)),
            }
        }
        out
    }

    fn nodes_with(&self, n_interior: usize, role: BoundaryRole) -> impl Iterator<Item = usize> + '_ {
        self.roles.iter().enumerate().filter(move |(_, &r)| r == role).map(move |(i, _)| n_interior + i)
    }

    /// Global indices of the Steklov nodes.
    pub fn steklov_nodes(&self, n_interior: usize) -> Vec<usize> {
        self.nodes_with(n_interior, BoundaryRole::Steklov).collect()
    }

    /// Nodes eliminated by the Schur complement: interior and Neumann nodes.
    pub fn unknowns(&self, n_interior: usize) -> Vec<usize> {
        (0..n_interior).chain(self.nodes_with(n_interior, BoundaryRole::NeumannZero)).collect()
    }

    /// Factors the block of `pM + K` this partition eliminates.
    pub fn factor(&self, mats: &FemMatrices, p: f64) -> Result<InteriorFactor> {
        self.check_len(mats)?;
        InteriorFactor::with_unknowns(mats, p, self.unknowns(mats.n_interior))
    }

    fn check_len(&self, mats: &FemMatrices) -> Result<()> {
        if self.roles.len() != mats.n_boundary {
            return Err(Error::Dimension { expected: mats.n_boundary, got: self.roles.len() });
        }
        Ok(())
    }
}

/// Dense Schur complement `S` and boundary mass on the Steklov nodes.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    pub p: f64,
    pub s: Mat<f64>,
    pub mb: Mat<f64>,
    /// Global node index of each row of `s`.
    pub steklov: Vec<usize>,
    pub partition: BoundaryPartition,
}

impl DtnOperator {
    pub fn dim(&self) -> usize {
        self.steklov.len()
    }
}

/// Assembles the Schur complement of `pM + K` onto the Steklov nodes.
///
/// `factor` must have been built for `p` on `partition.unknowns()`. Column
/// blocks of `A_us` are solved independently and in parallel under
/// [`Execution::Parallel`].
pub fn build_dtn(
    mats: &FemMatrices,
    factor: &InteriorFactor,
    p: f64,
    partition: &BoundaryPartition,
    exec: Execution,
) -> Result<DtnOperator> {
    partition.check_len(mats)?;
    if factor.p() != p {
        return Err(Error::InvalidArgument(format!("factor was built for p = {}, asked for p = {p}", factor.p())));
    }
    if factor.unknowns() != partition.unknowns(mats.n_interior).as_slice() {
        return Err(Error::InvalidArgument("factor does not match the boundary partition".into()));
    }
    let steklov = partition.steklov_nodes(mats.n_interior);
    let ns = steklov.len();
    let nu = factor.unknowns().len();
    let a = factor.system();
    let mut spos = vec![usize::MAX; mats.n_nodes()];
    for (l, &g) in steklov.iter().enumerate() {
        spos[g] = l;
    }

    let n_blocks = ns.div_ceil(SCHUR_BLOCK);
    let blocks = map_range(exec, n_blocks, |b| {
        let cols = &steklov[b * SCHUR_BLOCK..((b + 1) * SCHUR_BLOCK).min(ns)];
        let mut x = Mat::<f64>::zeros(nu, cols.len());
        let mut out = Mat::<f64>::zeros(ns, cols.len());
        for (c, &g) in cols.iter().enumerate() {
            let (rows, vals) = a.column(g);
            for (&i, &v) in rows.iter().zip(vals) {
                if let Some(li) = factor.local_index(i) {
                    x[(li, c)] = v;
                } else if spos[i] != usize::MAX {
                    out[(spos[i], c)] = v;
                }
            }
        }
        if nu > 0 {
            factor.solve_in_place(x.as_mut());
        }
        for (r, &g) in steklov.iter().enumerate() {
            let (rows, vals) = a.column(g);
            for (&i, &v) in rows.iter().zip(vals) {
                if let Some(li) = factor.local_index(i) {
                    for c in 0..cols.len() {
                        out[(r, c)] -= v * x[(li, c)];
                    }
                }
            }
        }
        out
    });

    let mut s = Mat::<f64>::zeros(ns, ns);
    for (b, block) in blocks.iter().enumerate() {
        for c in 0..block.ncols() {
            for r in 0..ns {
                s[(r, b * SCHUR_BLOCK + c)] = block[(r, c)];
            }
        }
    }
    let s = Mat::from_fn(ns, ns, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mb = Mat::from_fn(ns, ns, |i, j| mats.mb.get(steklov[i] - mats.n_interior, steklov[j] - mats.n_interior));
    Ok(DtnOperator { p, s, mb, steklov, partition: partition.clone() })
}

/// Lowest Steklov eigenpairs at one value of `p`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub p: f64,
    /// Ascending.
    pub mu: Vec<f64>,
    /// `M_b`-orthonormal boundary eigenvectors, one column per eigenvalue,
    /// one row per Steklov node.
    pub v: Mat<f64>,
    /// Global node index of each row of `v`.
    pub steklov: Vec<usize>,
    /// Full nodal extensions `V_k`, when computed.
    pub extensions: Option<Vec<Vec<f64>>>,
    pub degeneracy_tol: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Boundary eigenvector `k` as a vector over Steklov nodes.
    pub fn boundary_vector(&self, k: usize) -> Vec<f64> {
        self.v.col(k).iter().copied().collect()
    }

    /// Boundary eigenvector `k` embedded in the full node space.
    pub fn boundary_vector_full(&self, k: usize, n_nodes: usize) -> Vec<f64> {
        let mut u = vec![0.0; n_nodes];
        for (r, &g) in self.steklov.iter().enumerate() {
            u[g] = self.v[(r, k)];
        }
        u
    }

    pub fn extension(&self, k: usize) -> Option<&[f64]> {
        self.extensions.as_ref().map(|e| e[k].as_slice())
    }

    /// Index ranges of eigenvalues equal within the degeneracy tolerance.
    pub fn multiplets(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (k, &mu) in self.mu.iter().enumerate() {
            match out.last_mut() {
                Some(r) if (mu - self.mu[r.end - 1]).abs() <= self.degeneracy_tol * mu.abs().max(1.0) => r.end = k + 1,
                _ => out.push(k..k + 1),
            }
        }
        out
    }

    /// Computes the interior extension of every eigenvector.
    pub fn with_extensions(mut self, factor: &InteriorFactor, n_nodes: usize, exec: Execution) -> Result<Self> {
        if factor.p() != self.p {
            return Err(Error::InvalidArgument(format!(
                "factor was built for p = {}, spectrum has p = {}",
                factor.p(),
                self.p
            )));
        }
        self.extensions = Some(extend_columns(factor, &self.steklov, &self.v, n_nodes, exec));
        Ok(self)
    }
}

/// The `count` smallest eigenpairs of `S v = μ M_b v`.
///
/// Eigenvectors are `M_b`-orthonormal with sign chosen so that
/// `1ᵀ M_b v ≥ 0`; when that integral vanishes the first nonzero entry is
/// made positive.
pub fn eigensolve(op: &DtnOperator, count: usize) -> Result<Spectrum> {
    let n = op.dim();
    if count > n {
        return Err(Error::InvalidArgument(format!("asked for {count} eigenpairs of a {n}-node operator")));
    }
    let (vals, vecs) = generalized_eigh(op.s.as_ref(), op.mb.as_ref())?;
    let weights: Vec<f64> = (0..n).map(|i| op.mb.row(i).iter().sum()).collect();
    let mut v = vecs.get(.., ..count).to_owned();
    orient_columns(&mut v, &weights);
    Ok(Spectrum {
        p: op.p,
        mu: vals[..count].to_vec(),
        v,
        steklov: op.steklov.clone(),
        extensions: None,
        degeneracy_tol: DEGENERACY_TOL,
    })
}

/// Applies the sign convention to every column of `v`.
pub(crate) fn orient_columns(v: &mut Mat<f64>, weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    for k in 0..v.ncols() {
        let integral: f64 = (0..v.nrows()).map(|i| weights[i] * v[(i, k)]).sum();
        let flip = if integral.abs() > 1e-9 * total.sqrt() {
            integral < 0.0
        } else {
            let scale = (0..v.nrows()).map(|i| v[(i, k)].abs()).fold(0.0, f64::max);
            (0..v.nrows()).map(|i| v[(i, k)]).find(|x| x.abs() > 1e-8 * scale).is_some_and(|x| x < 0.0)
        };
        if flip {
            for i in 0..v.nrows() {
                v[(i, k)] = -v[(i, k)];
            }
        }
    }
}

/// Factors, builds and diagonalizes the pure Steklov operator at `p`.
/// The factor is returned for extensions.
pub fn solve_steklov(mats: &FemMatrices, p: f64, count: usize, exec: Execution) -> Result<(InteriorFactor, Spectrum)> {
    let partition = BoundaryPartition::steklov(mats.n_boundary);
    let factor = partition.factor(mats, p)?;
    let op = build_dtn(mats, &factor, p, &partition, exec)?;
    let spectrum = eigensolve(&op, count)?;
    Ok((factor, spectrum))
}

/// Extension of a boundary vector: `v` on the Steklov nodes, zero on
/// Dirichlet nodes, and the discrete `(p - Δ)u = 0` solution elsewhere.
pub fn extend_eigenfunction(
    mats: &FemMatrices,
    factor: &InteriorFactor,
    p: f64,
    partition: &BoundaryPartition,
    v: &[f64],
) -> Result<Vec<f64>> {
    partition.check_len(mats)?;
    if factor.p() != p {
        return Err(Error::InvalidArgument(format!("factor was built for p = {}, asked for p = {p}", factor.p())));
    }
    let steklov = partition.steklov_nodes(mats.n_interior);
    if v.len() != steklov.len() {
        return Err(Error::Dimension { expected: steklov.len(), got: v.len() });
    }
    let mut u = vec![0.0; mats.n_nodes()];
    for (&g, &x) in steklov.iter().zip(v) {
        u[g] = x;
    }
    factor.extend_in_place(&mut u);
    Ok(u)
}

fn extend_columns(
    factor: &InteriorFactor,
    steklov: &[usize],
    v: &Mat<f64>,
    n_nodes: usize,
    exec: Execution,
) -> Vec<Vec<f64>> {
    let a = factor.system();
    let nu = factor.unknowns().len();
    let n = v.ncols();
    let blocks = map_range(exec, n.div_ceil(SCHUR_BLOCK), |b| {
        let ks = b * SCHUR_BLOCK..((b + 1) * SCHUR_BLOCK).min(n);
        let mut rhs = Mat::<f64>::zeros(nu, ks.len());
        for (r, &g) in steklov.iter().enumerate() {
            let (rows, vals) = a.column(g);
            for (&i, &a_ig) in rows.iter().zip(vals) {
                if let Some(li) = factor.local_index(i) {
                    for (c, k) in ks.clone().enumerate() {
                        rhs[(li, c)] -= a_ig * v[(r, k)];
                    }
                }
            }
        }
        if nu > 0 {
            factor.solve_in_place(rhs.as_mut());
        }
        ks.clone()
            .enumerate()
            .map(|(c, k)| {
                let mut u = vec![0.0; n_nodes];
                for (r, &g) in steklov.iter().enumerate() {
                    u[g] = v[(r, k)];
                }
                for (l, &g) in factor.unknowns().iter().enumerate() {
                    u[g] = rhs[(l, c)];
                }
                u
            })
            .collect::<Vec<_>>()
    });
    blocks.into_iter().flatten().collect()
}

/// An analytic eigenvalue with the traces of a basis of its eigenspace on
/// the Steklov nodes.
#[derive(Debug, Clone)]
pub struct ModeGroup {
    pub mu: f64,
    pub traces: Vec<Vec<f64>>,
}

/// Boundary RMSE of each numeric eigenvector against the analytic
/// eigenspace it belongs to.
///
/// Analytic groups are consumed in order; eigenvector `k` is compared with
/// the group covering index `k`. The reference function is the `M_b`
/// projection of `v_k` onto that eigenspace, rescaled to unit norm, which
/// aligns both rotations inside degenerate pairs and signs.
pub fn eigenfunction_rmse(
    spectrum: &Spectrum,
    mats: &FemMatrices,
    groups: &[ModeGroup],
    mu_tol: f64,
) -> Result<Vec<f64>> {
    let ns = spectrum.steklov.len();
    let mut pos = vec![usize::MAX; mats.n_boundary];
    for (a, &g) in spectrum.steklov.iter().enumerate() {
        pos[g - mats.n_interior] = a;
    }
    let mb = |x: &[f64], y: &[f64]| -> f64 {
        let mut s = 0.0;
        for (a, &ga) in spectrum.steklov.iter().enumerate() {
            let (rows, vals) = mats.mb.column(ga - mats.n_interior);
            for (&lb, &w) in rows.iter().zip(vals) {
                if pos[lb] != usize::MAX {
                    s += x[a] * w * y[pos[lb]];
                }
            }
        }
        s
    };
    let mut out = Vec::with_capacity(spectrum.len());
    let mut k = 0;
    for g in groups {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for t in &g.traces {
            if t.len() != ns {
                return Err(Error::Dimension { expected: ns, got: t.len() });
            }
            let mut w = t.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = mb(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nrm = mb(&w, &w).sqrt();
            if nrm < 1e-12 {
                return Err(Error::Numerical("analytic traces are linearly dependent".into()));
            }
            basis.push(w.into_iter().map(|x| x / nrm).collect());
        }
        for _ in 0..g.traces.len() {
            if k == spectrum.len() {
                return Ok(out);
            }
            let mu = spectrum.mu[k];
            if (mu - g.mu).abs() > mu_tol {
                return Err(Error::Numerical(format!(
                    "eigenvalue {k}: numeric {mu} and analytic {} differ by more than {mu_tol}",
                    g.mu
                )));
            }
            let v = spectrum.boundary_vector(k);
            let mut f = vec![0.0; ns];
            for b in &basis {
                let c = mb(b, &v);
                f.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            let nrm = mb(&f, &f).sqrt();
            if nrm < 1e-6 {
                return Err(Error::Numerical(format!("eigenvector {k} is orthogonal to its analytic eigenspace")));
            }
            let sq: f64 = v.iter().zip(&f).map(|(a, b)| (a - b / nrm).powi(2)).sum();
            out.push((sq / ns as f64).sqrt());
            k += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;

    fn two_triangles_with_center() -> Mesh {
        let nodes = vec![
            Point::new(0.4, 0.45),
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let tris = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]];
        Mesh::new(nodes, 1, tris, vec![[1, 2], [2, 3], [3, 4], [4, 1]])
    }

    #[test]
    fn schur_matches_dense_elimination() {
        let mats = assemble(&two_triangles_with_center()).unwrap();
        let p = 2.5;
        let part = BoundaryPartition::steklov(4);
        let f = part.factor(&mats, p).unwrap();
        let op = build_dtn(&mats, &f, p, &part, Execution::Sequential).unwrap();
        let a = mats.system(p);
        for i in 0..4 {
            for j in 0..4 {
                let want = a.get(i + 1, j + 1) - a.get(i + 1, 0) * a.get(0, j + 1) / a.get(0, 0);
                assert!((op.s[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn arcs_group_runs() {
        use BoundaryRole::*;
        let part = BoundaryPartition::from_roles(vec![Steklov, Steklov, DirichletZero, Steklov]).unwrap();
        assert_eq!(part.arcs(), vec![(0..2, Steklov), (2..3, DirichletZero), (3..4, Steklov)]);
        assert!(BoundaryPartition::from_roles(vec![NeumannZero]).is_err());
    }
}
