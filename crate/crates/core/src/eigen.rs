//! Symmetric generalized eigensolvers.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};

use crate::fem::{SparseSymMatrix, SymFactor};
use crate::{Error, Result};

/// All eigenpairs of `A v = λ B v` with `B` positive definite, ascending,
/// eigenvectors `B`-orthonormal (columns of the returned matrix).
pub(crate) fn generalized_eigh(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let llt =
        b.llt(Side::Lower).map_err(|e| Error::Eigensolver(format!("mass matrix not positive definite: {e:?}")))?;
    let l = llt.L();
    // C = L⁻¹ A L⁻ᵀ, formed as L⁻¹ (L⁻¹ A)ᵀ using the symmetry of A.
    let mut x = a.to_owned();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    let mut v = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), v.as_mut(), Par::Seq);
    Ok((values, v))
}

/// Lowest eigenpairs of the sparse pencil `(A, M)` for `A` positive
/// semidefinite and `M` positive definite.
///
/// `shifted` is the factor of `A + M`. Shift-invert Lanczos on
/// `(A + M)⁻¹ M` in the `M` inner product, with
/// full reorthogonalization. The Krylov dimension grows until every wanted
/// pair meets `tol` in the relative residual `‖Au − λMu‖ / ‖A‖₁`.
pub(crate) fn lowest_sparse(
    shifted: &SymFactor,
    a: &SparseSymMatrix,
    m: &SparseSymMatrix,
    count: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.dim();
    if count > n {
        return Err(Error::InvalidArgument(format!("asked for {count} eigenpairs of a {n}-dim pencil")));
    }
    let a_norm = (0..n).map(|j| a.column(j).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut ncv = (2 * count + 40).min(n);
    loop {
        let (vals, vecs) = lanczos(shifted, m, n, ncv, count)?;
        let worst = vals
            .iter()
            .zip(&vecs)
            .map(|(&lam, u)| {
                let au = a.mul_vec(u);
                let mu = m.mul_vec(u);
                au.iter().zip(&mu).map(|(x, y)| (x - lam * y).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        if worst <= tol * a_norm {
            return Ok((vals, vecs));
        }
        if ncv == n {
            return Err(Error::Eigensolver(format!(
                "Lanczos residual {worst:e} above {tol:e}·‖A‖ with a full Krylov space"
            )));
        }
        ncv = (2 * ncv).min(n);
    }
}

fn lanczos(
    shifted: &SymFactor,
    m: &SparseSymMatrix,
    n: usize,
    ncv: usize,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    // Deterministic start vector, rich in every mode.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).sin()).collect();
    let mut mv = m.mul_vec(&v);
    let nrm = dot(&v, &mv).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    mv.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ncv);
    let mut mbasis: Vec<Vec<f64>> = Vec::with_capacity(ncv);
    let mut alpha = Vec::with_capacity(ncv);
    let mut beta: Vec<f64> = Vec::with_capacity(ncv);
    for _ in 0..ncv {
        let mut w = shifted.solve(&mv);
        basis.push(v);
        mbasis.push(mv);
        let j = basis.len() - 1;
        // Two passes of classical Gram-Schmidt against the whole basis.
        let mut a_j = 0.0;
        for pass in 0..2 {
            for (i, (b, mb)) in basis.iter().zip(&mbasis).enumerate() {
                let c = dot(mb, &w);
                if pass == 0 && i == j {
                    a_j = c;
                }
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        alpha.push(a_j);
        let mw = m.mul_vec(&w);
        let b_j = dot(&w, &mw).max(0.0).sqrt();
        if basis.len() == ncv || b_j <= 1e-13 * a_j.abs().max(1e-300) {
            break;
        }
        beta.push(b_j);
        v = w.into_iter().map(|x| x / b_j).collect();
        mv = mw.into_iter().map(|x| x / b_j).collect();
    }

    let k = alpha.len();
    if k < count {
        return Err(Error::Eigensolver(format!("Krylov space exhausted at dimension {k} < {count}")));
    }
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    // θ = 1/(λ + 1): the largest θ are the lowest λ.
    let mut vals = Vec::with_capacity(count);
    let mut vecs = Vec::with_capacity(count);
    for r in (k - count..k).rev() {
        let theta = evd.S()[r];
        vals.push(1.0 / theta - 1.0);
        let mut u = vec![0.0; n];
        for (i, b) in basis.iter().enumerate() {
            let y = evd.U()[(i, r)];
            u.iter_mut().zip(b).for_each(|(x, z)| *x += y * z);
        }
        let nu = dot(&u, &m.mul_vec(&u)).sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        vecs.push(u);
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_dense_diagonal_pencil() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { [2.0, 9.0, 4.0][i] } else { 0.0 });
        let b = Mat::from_fn(3, 3, |i, j| if i == j { [1.0, 3.0, 2.0][i] } else { 0.0 });
        let (vals, v) = generalized_eigh(a.as_ref(), b.as_ref()).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
        let vtbv = v.transpose() * &b * &v;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtbv[(i, j)] - want).abs() < 1e-14);
            }
        }
    }
}
