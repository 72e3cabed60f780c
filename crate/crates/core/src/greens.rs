//! DtN spectra from a boundary integral operator.
//!
//! The kernel `g̃_q = (G̃_0 − G̃_q)/q` restricted to the boundary has
//! eigenvalues `η_k = 1/(μ_k(μ_k + q))`, where `G̃_q` is the Green's function
//! of `p − Δ` with Robin condition `∂_n u + q u = 0`. Each `G̃_q` is a
//! truncated expansion over FEM eigenpairs of the Robin Laplacian.

use faer::{Mat, Side};
use serde::Serialize;

use crate::dtn::{orient_columns, Spectrum, DEGENERACY_TOL};
use crate::eigen::{generalized_eigh, lowest_sparse};
use crate::fem::{FemMatrices, SymFactor};
use crate::par::{map_range, Execution};
use crate::{Error, Result};

pub const DEFAULT_Q: f64 = 1.0;
pub const DEFAULT_M: usize = 131;

/// Meshes up to this many nodes use the dense generalized eigensolver.
const DENSE_LIMIT: usize = 1500;

/// Relative residual target of the Robin eigenpairs.
const ROBIN_TOL: f64 = 1e-9;

/// Row block of the kernel assembly.
const KERNEL_BLOCK: usize = 64;

/// The `m` lowest eigenpairs of `−Δu = λu` with `∂_n u + q u = 0`.
#[derive(Debug, Clone)]
pub struct RobinEigenbasis {
    pub q: f64,
    /// Ascending.
    pub lambda: Vec<f64>,
    /// `M`-orthonormal modes, one column per eigenvalue.
    pub modes: Mat<f64>,
}

impl RobinEigenbasis {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.modes.col(k).iter().copied().collect()
    }

    /// Weyl-law estimate of the neglected diagonal tail
    /// `Σ_{k≥m} 1/(p + λ_k) · |Ω|⁻¹` up to `n_max` modes.
    pub fn tail_estimate(&self, p: f64, area: f64, n_max: usize) -> f64 {
        let m = self.len() as f64;
        let n = (n_max as f64).max(m);
        let s = 4.0 * std::f64::consts::PI;
        ((p * area + s * n) / (p * area + s * m)).ln() / s
    }

    fn check_p(&self, p: f64) -> Result<()> {
        let l0 = self.lambda.first().copied().unwrap_or(0.0);
        if !(p.is_finite() && p + l0 > 1e-12 * l0.abs().max(1.0)) {
            return Err(Error::InvalidArgument(format!("Green's function needs p + λ_0 > 0, got p = {p}, λ_0 = {l0}")));
        }
        Ok(())
    }
}

/// Lowest `m` eigenpairs of the pencil `(K + q B, M)`, `B` the boundary
/// mass embedded in the full node space.
pub fn robin_eigenbasis(mats: &FemMatrices, q: f64, m: usize) -> Result<RobinEigenbasis> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("q must be finite and >= 0, got {q}")));
    }
    let n = mats.n_nodes();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("m = {m} outside 1..={n}")));
    }
    let a = mats.k.add(1.0, &mats.boundary_mass_full(), q);
    let (lambda, modes) = if n <= DENSE_LIMIT {
        let (vals, vecs) = generalized_eigh(a.to_dense().as_ref(), mats.m.to_dense().as_ref())?;
        (vals[..m].to_vec(), vecs.get(.., ..m).to_owned())
    } else {
        let shifted = SymFactor::full(&a.add(1.0, &mats.m, 1.0))?;
        let (vals, vecs) = lowest_sparse(&shifted, &a, &mats.m, m, ROBIN_TOL)?;
        (vals, Mat::from_fn(n, m, |i, k| vecs[k][i]))
    };
    Ok(RobinEigenbasis { q, lambda, modes })
}

/// Truncated `G̃_q(x, p | x0) = Σ u_k(x0) u_k(x) / (p + λ_k)` at two nodes.
pub fn green_function(basis: &RobinEigenbasis, p: f64, x0: usize, x: usize) -> Result<f64> {
    basis.check_p(p)?;
    Ok((0..basis.len()).map(|k| basis.modes[(x0, k)] * basis.modes[(x, k)] / (p + basis.lambda[k])).sum())
}

/// Discrete boundary operator `G_ij = δx_j g̃_q(x_j, p | x_i)`.
#[derive(Debug, Clone)]
pub struct GreenKernelMatrix {
    pub p: f64,
    pub q: f64,
    /// Symmetric kernel values `g̃_q(x_j | x_i)`, boundary order.
    pub kernel: Mat<f64>,
    /// Lumped boundary weights `δx_j`.
    pub weights: Vec<f64>,
}

impl GreenKernelMatrix {
    /// `G_ij = kernel_ij · δx_j`.
    pub fn matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.kernel.nrows(), self.kernel.ncols(), |i, j| self.kernel[(i, j)] * self.weights[j])
    }
}

fn check_pair(neumann: &RobinEigenbasis, robin: &RobinEigenbasis) -> Result<f64> {
    if neumann.q != 0.0 {
        return Err(Error::InvalidArgument(format!("first basis must have q = 0, got {}", neumann.q)));
    }
    let q = robin.q;
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel needs q > 0, got {q}")));
    }
    if neumann.modes.nrows() != robin.modes.nrows() {
        return Err(Error::Dimension { expected: neumann.modes.nrows(), got: robin.modes.nrows() });
    }
    Ok(q)
}

/// Assembles `g̃_q` on the boundary nodes from a Neumann and a Robin basis.
pub fn green_kernel_matrix(
    mats: &FemMatrices,
    neumann: &RobinEigenbasis,
    robin: &RobinEigenbasis,
    p: f64,
    exec: Execution,
) -> Result<GreenKernelMatrix> {
    let q = check_pair(neumann, robin)?;
    neumann.check_p(p)?;
    robin.check_p(p)?;
    let nb = mats.n_boundary;
    let off = mats.n_interior;
    // Boundary rows scaled by 1/√(p + λ), so the kernel is a difference of Gram matrices.
    let scaled =
        |b: &RobinEigenbasis| Mat::from_fn(nb, b.len(), |i, k| b.modes[(off + i, k)] / (p + b.lambda[k]).sqrt());
    let u0 = scaled(neumann);
    let uq = scaled(robin);
    let blocks = nb.div_ceil(KERNEL_BLOCK);
    let rows = map_range(exec, blocks, |b| {
        let lo = b * KERNEL_BLOCK;
        let hi = (lo + KERNEL_BLOCK).min(nb);
        let g0 = u0.get(lo..hi, ..) * u0.transpose();
        let gq = uq.get(lo..hi, ..) * uq.transpose();
        (lo, (g0 - gq) / faer::Scale(q))
    });
    let mut kernel = Mat::zeros(nb, nb);
    for (lo, block) in rows {
        kernel.get_mut(lo..lo + block.nrows(), ..).copy_from(&block);
    }
    let kernel = Mat::from_fn(nb, nb, |i, j| 0.5 * (kernel[(i, j)] + kernel[(j, i)]));
    if kernel.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite Green's kernel entry".into()));
    }
    Ok(GreenKernelMatrix { p, q, kernel, weights: mats.boundary_weights() })
}

/// `η = 1 / (μ (μ + q))`.
pub fn eta_from_mu(mu: f64, q: f64) -> f64 {
    1.0 / (mu * (mu + q))
}

/// Positive root of `μ² + qμ = 1/η`.
pub fn mu_from_eta(eta: f64, q: f64) -> f64 {
    let d = (1.0 / eta + 0.25 * q * q).sqrt();
    // Cancellation-free form of d − q/2.
    (1.0 / eta) / (d + 0.5 * q)
}

/// The `count` lowest DtN eigenpairs from the kernel matrix.
///
/// `G = g W` with `W = diag(δx)` is similar to the symmetric
/// `W^{1/2} g W^{1/2}`, so its spectrum is real; eigenvectors are mapped
/// back and come out orthonormal in the `W`-weighted inner product. The
/// returned `steklov` list is empty; the caller fills in node indices.
pub fn spectrum_from_kernel(g: &GreenKernelMatrix, count: usize) -> Result<Spectrum> {
    let nb = g.kernel.nrows();
    if count == 0 || count > nb {
        return Err(Error::InvalidArgument(format!("count = {count} outside 1..={nb}")));
    }
    let sw: Vec<f64> = g.weights.iter().map(|w| w.sqrt()).collect();
    let sym = Mat::from_fn(nb, nb, |i, j| sw[i] * g.kernel[(i, j)] * sw[j]);
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    // Largest η first, i.e. smallest μ.
    let mut mu = Vec::with_capacity(count);
    let mut v = Mat::zeros(nb, count);
    for c in 0..count {
        let idx = nb - 1 - c;
        let eta = evd.S()[idx];
        if !(eta > 0.0) {
            return Err(Error::Numerical(format!("η_{c} = {eta:e} is not positive; increase the truncation m")));
        }
        mu.push(mu_from_eta(eta, g.q));
        for i in 0..nb {
            v[(i, c)] = evd.U()[(i, idx)] / sw[i];
        }
    }
    orient_columns(&mut v, &g.weights);
    Ok(Spectrum { p: g.p, mu, v, steklov: Vec::new(), extensions: None, degeneracy_tol: DEGENERACY_TOL })
}

/// Green's-function spectrum from precomputed bases, reusable across `p`.
pub fn dtn_spectrum_with_bases(
    mats: &FemMatrices,
    neumann: &RobinEigenbasis,
    robin: &RobinEigenbasis,
    p: f64,
    count: usize,
    exec: Execution,
) -> Result<Spectrum> {
    let g = green_kernel_matrix(mats, neumann, robin, p, exec)?;
    let mut s = spectrum_from_kernel(&g, count)?;
    s.steklov = (mats.n_interior..mats.n_nodes()).collect();
    Ok(s)
}

/// Computes the Neumann and Robin bases with `m` modes each, then the
/// `count` lowest DtN eigenpairs at `p`.
pub fn dtn_spectrum_via_green(
    mats: &FemMatrices,
    q: f64,
    p: f64,
    m: usize,
    count: usize,
    exec: Execution,
) -> Result<Spectrum> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel needs q > 0, got {q}")));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 0, got {p}")));
    }
    let neumann = robin_eigenbasis(mats, 0.0, m)?;
    let robin = robin_eigenbasis(mats, q, m)?;
    dtn_spectrum_with_bases(mats, &neumann, &robin, p, count, exec)
}

/// `V_k(x0) = ∫ G̃_0(x, p | x0) μ_k v_k(x) dx` at every node, by lumped
/// boundary quadrature.
///
/// At `p = 0` the constant Neumann mode is skipped, since `v_k` is
/// orthogonal to constants for `k > 0`; `k = 0` is an error there.
pub fn extend_via_green(
    mats: &FemMatrices,
    neumann: &RobinEigenbasis,
    spectrum: &Spectrum,
    k: usize,
) -> Result<Vec<f64>> {
    if neumann.q != 0.0 {
        return Err(Error::InvalidArgument(format!("extension needs the q = 0 basis, got q = {}", neumann.q)));
    }
    if k >= spectrum.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside the {} computed modes", spectrum.len())));
    }
    let p = spectrum.p;
    if p == 0.0 && k == 0 {
        return Err(Error::InvalidArgument(
            "extension is undefined for p = 0, k = 0; V_0 is the constant |∂Ω|^{-1/2}".into(),
        ));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 0, got {p}")));
    }
    let nb = mats.n_boundary;
    if spectrum.v.nrows() != nb {
        return Err(Error::Dimension { expected: nb, got: spectrum.v.nrows() });
    }
    let w = mats.boundary_weights();
    let mu = spectrum.mu[k];
    let off = mats.n_interior;
    let coef: Vec<f64> = (0..neumann.len())
        .map(|j| {
            let denom = p + neumann.lambda[j];
            if denom <= 1e-10 * neumann.lambda.last().copied().unwrap_or(1.0).max(1.0) {
                return 0.0;
            }
            let proj: f64 = (0..nb).map(|i| w[i] * neumann.modes[(off + i, j)] * spectrum.v[(i, k)]).sum();
            mu * proj / denom
        })
        .collect();
    Ok((0..mats.n_nodes()).map(|x| coef.iter().enumerate().map(|(j, c)| c * neumann.modes[(x, j)]).sum()).collect())
}

/// Largest deviation between the truncated `(G̃_0 − G̃_q)/q` and the
/// expansion `Σ v_k v_kᵀ / (μ_k (μ_k + q))` rebuilt from a reference
/// spectrum over all boundary nodes, relative to the largest kernel entry.
pub fn kernel_consistency(g: &GreenKernelMatrix, reference: &Spectrum) -> f64 {
    let nb = g.kernel.nrows();
    let scale = g.kernel.col_iter().flat_map(|c| c.iter().map(|v| v.abs()).collect::<Vec<_>>()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..nb {
        for j in 0..nb {
            let r: f64 = (0..reference.len())
                .map(|k| reference.v[(i, k)] * reference.v[(j, k)] * eta_from_mu(reference.mu[k], g.q))
                .sum();
            worst = worst.max((r - g.kernel[(i, j)]).abs());
        }
    }
    worst / scale
}

/// Summary of one Green's-function run.
#[derive(Debug, Clone, Serialize)]
pub struct GreenRunInfo {
    pub q: f64,
    pub m: usize,
    pub lambda_max_neumann: f64,
    pub lambda_max_robin: f64,
    pub tail_estimate: f64,
}

impl GreenRunInfo {
    pub fn new(mats: &FemMatrices, neumann: &RobinEigenbasis, robin: &RobinEigenbasis, p: f64) -> Self {
        GreenRunInfo {
            q: robin.q,
            m: neumann.len(),
            lambda_max_neumann: neumann.lambda.last().copied().unwrap_or(0.0),
            lambda_max_robin: robin.lambda.last().copied().unwrap_or(0.0),
            tail_estimate: neumann.tail_estimate(p, mats.area(), mats.n_nodes()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_mu_round_trip() {
        for &(mu, q) in &[(1e-4, 1.0), (0.4464, 1.0), (37.0, 0.3), (2.0, 50.0)] {
            let back = mu_from_eta(eta_from_mu(mu, q), q);
            assert!((back - mu).abs() <= 1e-13 * mu.max(1.0), "{mu} {q} -> {back}");
        }
    }
}
