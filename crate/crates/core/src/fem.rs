//! P1 finite elements: stiffness, mass and boundary-mass assembly, and the
//! factored interior block of `pM + K`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, MatMut, Side};

use crate::mesh::Mesh;
use crate::{Error, Result};

/// Symmetric sparse matrix in compressed-column form. Both triangles are
/// stored, so columns double as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Sums duplicate entries. The caller supplies both `(i, j)` and
    /// `(j, i)` for off-diagonal terms.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            cols[j].push((i, v));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut c in cols {
            c.sort_by_key(|e| e.0);
            for (i, v) in c {
                if row_idx.len() > *col_ptr.last().unwrap() && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseSymMatrix { n, col_ptr, row_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * x[j];
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).1.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `a·self + b·other` for matrices with the same sparsity pattern.
    pub fn lin_comb(&self, a: f64, other: &SparseSymMatrix, b: f64) -> SparseSymMatrix {
        assert!(self.col_ptr == other.col_ptr && self.row_idx == other.row_idx, "sparsity patterns differ");
        SparseSymMatrix {
            n: self.n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// `a·self + b·other` for arbitrary sparsity patterns.
    pub fn add(&self, a: f64, other: &SparseSymMatrix, b: f64) -> SparseSymMatrix {
        assert_eq!(self.n, other.n, "dimensions differ");
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, a), (other, b)] {
            for j in 0..m.n {
                let (rows, vals) = m.column(j);
                t.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, j, s * v)));
            }
        }
        SparseSymMatrix::from_triplets(self.n, &t)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for j in 0..self.n {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `idx`, as a lower-triangular faer matrix.
    fn principal_lower(&self, idx: &[usize], local: &[usize]) -> Result<SparseColMat<usize, f64>> {
        let mut col_ptr = Vec::with_capacity(idx.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (lj, &gj) in idx.iter().enumerate() {
            let (rows, vals) = self.column(gj);
            let mut col: Vec<(usize, f64)> = rows
                .iter()
                .zip(vals)
                .filter_map(|(&gi, &v)| {
                    let li = local[gi];
                    (li != usize::MAX && li >= lj).then_some((li, v))
                })
                .collect();
            col.sort_unstable_by_key(|e| e.0);
            for (li, v) in col {
                row_idx.push(li);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        let n = idx.len();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Ok(SparseColMat::new(symbolic, values))
    }
}

/// Stiffness `K` and mass `M` over all nodes, and the boundary mass `M_b`
/// over boundary nodes (local index `node - n_interior`).
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub k: SparseSymMatrix,
    pub m: SparseSymMatrix,
    pub mb: SparseSymMatrix,
    pub n_interior: usize,
    pub n_boundary: usize,
}

impl FemMatrices {
    pub fn n_nodes(&self) -> usize {
        self.n_interior + self.n_boundary
    }

    /// `pM + K`.
    pub fn system(&self, p: f64) -> SparseSymMatrix {
        self.m.lin_comb(p, &self.k, 1.0)
    }

    /// Lumped boundary weights: half the length of the two adjacent edges.
    pub fn boundary_weights(&self) -> Vec<f64> {
        self.mb.row_sums()
    }

    /// `M_b` embedded in the full node space.
    pub fn boundary_mass_full(&self) -> SparseSymMatrix {
        let off = self.n_interior;
        let mut t = Vec::with_capacity(self.mb.nnz());
        for j in 0..self.n_boundary {
            let (rows, vals) = self.mb.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                t.push((i + off, j + off, v));
            }
        }
        SparseSymMatrix::from_triplets(self.n_nodes(), &t)
    }

    /// Perimeter of the discrete boundary, `1ᵀ M_b 1`.
    pub fn perimeter(&self) -> f64 {
        self.mb.total()
    }

    pub fn area(&self) -> f64 {
        self.m.total()
    }
}

/// Assembles exact P1 element integrals.
pub fn assemble(mesh: &Mesh) -> Result<FemMatrices> {
    let n = mesh.n_nodes();
    let mut kt = Vec::with_capacity(mesh.triangles.len() * 9);
    let mut mt = Vec::with_capacity(mesh.triangles.len() * 9);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area {area}")));
        }
        let p = tri.map(|v| mesh.nodes[v]);
        // grad φ_i = (b_i, c_i) / (2A)
        let mut b = [0.0; 3];
        let mut c = [0.0; 3];
        for i in 0..3 {
            let (pj, pk) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            b[i] = pj.y - pk.y;
            c[i] = pk.x - pj.x;
        }
        for i in 0..3 {
            for j in 0..3 {
                let kij = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                let mij = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                kt.push((tri[i], tri[j], kij));
                mt.push((tri[i], tri[j], mij));
            }
        }
    }
    let nb = mesh.n_boundary;
    let mut bt = Vec::with_capacity(mesh.boundary_edges.len() * 4);
    for &[a, b] in &mesh.boundary_edges {
        let len = mesh.nodes[a].dist(mesh.nodes[b]);
        let (la, lb) = (a - mesh.n_interior, b - mesh.n_interior);
        bt.push((la, la, len / 3.0));
        bt.push((lb, lb, len / 3.0));
        bt.push((la, lb, len / 6.0));
        bt.push((lb, la, len / 6.0));
    }
    Ok(FemMatrices {
        k: SparseSymMatrix::from_triplets(n, &kt),
        m: SparseSymMatrix::from_triplets(n, &mt),
        mb: SparseSymMatrix::from_triplets(nb, &bt),
        n_interior: mesh.n_interior,
        n_boundary: nb,
    })
}

/// Sparse Cholesky factor of a principal block of a symmetric positive
/// definite matrix.
pub struct SymFactor {
    dim: usize,
    /// `None` for an empty block.
    llt: Option<Llt<usize, f64>>,
}

impl SymFactor {
    /// Factors `a[idx, idx]`; `local[g]` is the position of node `g` in
    /// `idx`, or `usize::MAX`.
    pub fn new(a: &SparseSymMatrix, idx: &[usize], local: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Ok(SymFactor { dim: 0, llt: None });
        }
        let lower = a.principal_lower(idx, local)?;
        let symbolic =
            SymbolicLlt::try_new(lower.symbolic(), Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = Llt::try_new_with_symbolic(symbolic, lower.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(SymFactor { dim: idx.len(), llt: Some(llt) })
    }

    /// Factors the whole matrix.
    pub fn full(a: &SparseSymMatrix) -> Result<Self> {
        let idx: Vec<usize> = (0..a.dim()).collect();
        Self::new(a, &idx, &idx)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        if let Some(llt) = &self.llt {
            llt.solve_in_place(rhs);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Sparse Cholesky factor of the block of `A = pM + K` on a set of
/// unknown nodes, reusable across any number of right-hand sides.
///
/// The unknown set is the mesh interior by default; mixed boundary
/// problems enlarge it with Neumann nodes.
pub struct InteriorFactor {
    p: f64,
    a: SparseSymMatrix,
    unknowns: Vec<usize>,
    /// Global node to position in `unknowns`, `usize::MAX` if absent.
    local: Vec<usize>,
    factor: SymFactor,
}

impl std::fmt::Debug for InteriorFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InteriorFactor").field("p", &self.p).field("unknowns", &self.unknowns.len()).finish()
    }
}

impl InteriorFactor {
    pub fn new(mats: &FemMatrices, p: f64) -> Result<Self> {
        Self::with_unknowns(mats, p, (0..mats.n_interior).collect())
    }

    pub fn with_unknowns(mats: &FemMatrices, p: f64, unknowns: Vec<usize>) -> Result<Self> {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be finite and >= 0, got {p}")));
        }
        let a = mats.system(p);
        let mut local = vec![usize::MAX; mats.n_nodes()];
        for (l, &g) in unknowns.iter().enumerate() {
            local[g] = l;
        }
        let factor = SymFactor::new(&a, &unknowns, &local)?;
        Ok(InteriorFactor { p, a, unknowns, local, factor })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The full matrix `pM + K` this factor was built from.
    pub fn system(&self) -> &SparseSymMatrix {
        &self.a
    }

    /// Nodes of the factored block, in block order.
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Position of a global node in the block, if it is an unknown.
    pub fn local_index(&self, node: usize) -> Option<usize> {
        let l = self.local[node];
        (l != usize::MAX).then_some(l)
    }

    /// Solves `A_uu X = B` in place; `B` has one row per unknown.
    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        self.factor.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }

    /// Fills the unknown entries of `u` so that `(A u)_i = 0` on every
    /// unknown node; the other entries of `u` are the prescribed data.
    pub fn extend_in_place(&self, u: &mut [f64]) {
        let mut rhs = vec![0.0; self.unknowns.len()];
        for j in 0..u.len() {
            if self.local[j] != usize::MAX || u[j] == 0.0 {
                continue;
            }
            let (rows, vals) = self.a.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let li = self.local[i];
                if li != usize::MAX {
                    rhs[li] -= v * u[j];
                }
            }
        }
        let x = self.solve(&rhs);
        for (l, &g) in self.unknowns.iter().enumerate() {
            u[g] = x[l];
        }
    }
}

/// Discrete solution of `(p - Δ)u = 0` with `u = f` on the boundary.
pub fn solve_dirichlet(mats: &FemMatrices, factor: &InteriorFactor, p: f64, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != mats.n_boundary {
        return Err(Error::Dimension { expected: mats.n_boundary, got: f.len() });
    }
    if factor.p() != p {
        return Err(Error::InvalidArgument(format!("factor was built for p = {}, asked for p = {p}", factor.p())));
    }
    if factor.unknowns().len() != mats.n_interior {
        return Err(Error::InvalidArgument("solve_dirichlet needs the plain interior factor".into()));
    }
    let mut u = vec![0.0; mats.n_nodes()];
    u[mats.n_interior..].copy_from_slice(f);
    factor.extend_in_place(&mut u);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use approx::assert_abs_diff_eq;

    fn reference_triangle() -> Mesh {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        Mesh::new(nodes, 0, vec![[0, 1, 2]], vec![[0, 1], [1, 2], [2, 0]])
    }

    #[test]
    fn reference_element_matrices() {
        let f = assemble(&reference_triangle()).unwrap();
        let k = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        let m = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(f.k.get(i, j), k[i][j], epsilon = 1e-15);
                assert_abs_diff_eq!(f.m.get(i, j), m[i][j] / 24.0, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(f.perimeter(), 2.0 + 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![7.0, 4.0]);
    }
}
