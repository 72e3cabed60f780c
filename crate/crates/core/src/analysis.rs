//! Derived spectral quantities: `p`-sweeps, the boundary averages `A_k`,
//! localization maps `B_k`, radial decay profiles `U_k` and the norm
//! identities of the extensions.

use std::io::Write;
use std::ops::Range;

use faer::{Mat, Side};
use serde::Serialize;

use crate::dtn::{orient_columns, solve_steklov, Spectrum};
use crate::fem::FemMatrices;
use crate::geometry::{Domain, DomainSpec};
use crate::mesh::Mesh;
use crate::output::{write_csv, Cell};
use crate::par::{map_range, Execution};
use crate::{Error, Result};

/// `|A_k|` at or below this counts as cancelled by symmetry.
pub const SYMMETRY_THRESHOLD: f64 = 1e-3;

/// `|V_k|` below this is blank in exported maps.
pub const DISPLAY_FLOOR: f64 = 1e-4;

/// `A_k = |∂Ω|^{-1/2} 1ᵀ M_b v_k`.
pub fn ak_coefficients(spectrum: &Spectrum, mats: &FemMatrices) -> Result<Vec<f64>> {
    let nb = mats.n_boundary;
    if spectrum.v.nrows() != spectrum.steklov.len() {
        return Err(Error::Dimension { expected: spectrum.steklov.len(), got: spectrum.v.nrows() });
    }
    let w = mats.boundary_weights();
    let scale = mats.perimeter().sqrt();
    let mut rows = Vec::with_capacity(spectrum.steklov.len());
    for &g in &spectrum.steklov {
        if g < mats.n_interior || g - mats.n_interior >= nb {
            return Err(Error::InvalidArgument(format!("node {g} is not a boundary node")));
        }
        rows.push(g - mats.n_interior);
    }
    Ok((0..spectrum.len())
        .map(|k| rows.iter().enumerate().map(|(r, &b)| w[b] * spectrum.v[(r, k)]).sum::<f64>() / scale)
        .collect())
}

/// `A_k = p / (μ_k √|∂Ω|) · 1ᵀ M V_k`, from the interior extensions.
pub fn ak_via_volume(spectrum: &Spectrum, mats: &FemMatrices) -> Result<Vec<f64>> {
    let p = spectrum.p;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("volume formula needs p > 0, got {p}")));
    }
    let ext = spectrum
        .extensions
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("spectrum has no interior extensions".into()))?;
    let w = mats.m.row_sums();
    let scale = mats.perimeter().sqrt();
    spectrum
        .mu
        .iter()
        .zip(ext)
        .map(|(&mu, v)| {
            if !(mu > 0.0) {
                return Err(Error::InvalidArgument(format!("volume formula needs μ > 0, got {mu}")));
            }
            let integral: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
            Ok(p * integral / (mu * scale))
        })
        .collect()
}

/// Indices split by whether `|A_k|` survives the symmetry threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryAudit {
    pub threshold: f64,
    pub mirror_symmetric: bool,
    pub vanishing: Vec<usize>,
    pub survivors: Vec<usize>,
}

pub fn symmetry_audit(ak: &[f64], domain: &Domain, threshold: f64) -> SymmetryAudit {
    let (vanishing, survivors) = (0..ak.len()).partition(|&k| ak[k].abs() <= threshold);
    SymmetryAudit { threshold, mirror_symmetric: domain.has_mirror_symmetry(), vanishing, survivors }
}

/// Cluster width used before auditing `A_k`: pairs that are degenerate by
/// symmetry are split by the mesh at about this relative level.
pub const CLUSTER_TOL: f64 = 1e-3;

/// Symmetry-adapted basis inside every near-degenerate cluster.
///
/// Eigenvalues within `tol · max(1, μ)` of their neighbour form a cluster.
/// In each cluster the projection of the constant is put on a single
/// vector, the `M_b`-orthogonal remainder is diagonalized, and the members
/// are reordered by Rayleigh quotient, which replaces `mu`. Sums of
/// `|A_k|²` over a cluster are unchanged; only their split is. Extensions
/// are rotated with the traces.
pub fn align_clusters(spectrum: &Spectrum, mats: &FemMatrices, tol: f64) -> Result<Spectrum> {
    let mut probe = spectrum.clone();
    probe.degeneracy_tol = tol;
    let a = ak_coefficients(spectrum, mats)?;
    let mut out = spectrum.clone();
    for range in probe.multiplets().into_iter().filter(|r| r.len() > 1) {
        let m = range.len();
        let mu = &spectrum.mu[range.clone()];
        let a_c = &a[range.clone()];
        let norm = a_c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            continue;
        }
        // Householder reflection taking e_0 to ±a/|a|; its other columns
        // span the complement.
        let sign = if a_c[0] > 0.0 { -1.0 } else { 1.0 };
        let mut hv: Vec<f64> = a_c.iter().map(|x| -sign * x / norm).collect();
        hv[0] += 1.0;
        let hh: f64 = hv.iter().map(|x| x * x).sum();
        let house = Mat::from_fn(m, m, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            if hh > 0.0 {
                id - 2.0 * hv[i] * hv[j] / hh
            } else {
                id
            }
        });
        let q = house.get(.., 1..);
        let t = Mat::from_fn(m - 1, m - 1, |i, j| (0..m).map(|r| q[(r, i)] * mu[r] * q[(r, j)]).sum::<f64>());
        let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let mut members: Vec<(f64, Vec<f64>)> = Vec::with_capacity(m);
        let u: Vec<f64> = (0..m).map(|r| house[(r, 0)]).collect();
        members.push((u.iter().zip(mu).map(|(c, l)| c * c * l).sum(), u));
        for j in 0..m - 1 {
            let c: Vec<f64> = (0..m).map(|r| (0..m - 1).map(|i| q[(r, i)] * evd.U()[(i, j)]).sum()).collect();
            members.push((evd.S()[j], c));
        }
        members.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (slot, (rayleigh, c)) in members.iter().enumerate() {
            let k = range.start + slot;
            out.mu[k] = *rayleigh;
            for r in 0..spectrum.v.nrows() {
                out.v[(r, k)] = (0..m).map(|i| c[i] * spectrum.v[(r, range.start + i)]).sum();
            }
            if let (Some(src), Some(dst)) = (&spectrum.extensions, &mut out.extensions) {
                dst[k] = (0..src[0].len()).map(|n| (0..m).map(|i| c[i] * src[range.start + i][n]).sum()).collect();
            }
        }
    }
    // Restore the sign convention and carry flips over to the extensions.
    let w = mats.boundary_weights();
    let weights: Vec<f64> = out.steklov.iter().map(|&g| w[g - mats.n_interior]).collect();
    let before = out.v.clone();
    orient_columns(&mut out.v, &weights);
    if let Some(ext) = &mut out.extensions {
        for (k, e) in ext.iter_mut().enumerate() {
            let flipped = (0..before.nrows()).any(|r| before[(r, k)] != out.v[(r, k)]);
            if flipped {
                e.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(out)
}

/// Distance of every mesh node to the boundary; exactly zero on boundary
/// nodes.
pub fn node_distances(mesh: &Mesh, domain: &Domain, exec: Execution) -> Vec<f64> {
    map_range(
        exec,
        mesh.n_nodes(),
        |i| {
            if mesh.is_boundary(i) {
                0.0
            } else {
                domain.distance_to_boundary(mesh.nodes[i])
            }
        },
    )
}

/// `B_k(x) = √|∂Ω| |V_k(x)| exp(μ_k dist(x, ∂Ω))` at every node.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationMap {
    pub k: usize,
    pub mu: f64,
    pub values: Vec<f64>,
    pub b: Vec<f64>,
    pub dist: Vec<f64>,
    pub floor: f64,
}

impl LocalizationMap {
    pub fn max_b(&self) -> f64 {
        self.b.iter().copied().fold(0.0, f64::max)
    }

    /// `node, x, y, dist, V, B`; `B` is blank where `|V|` is below the floor.
    pub fn write_csv<W: Write>(&self, w: &mut W, mesh: &Mesh) -> Result<()> {
        write_csv(
            w,
            &["node", "x", "y", "dist", "V", "B"],
            (0..self.values.len()).map(|i| {
                let b = if self.values[i].abs() < self.floor { Cell::from("") } else { self.b[i].into() };
                vec![
                    i.into(),
                    mesh.nodes[i].x.into(),
                    mesh.nodes[i].y.into(),
                    self.dist[i].into(),
                    self.values[i].into(),
                    b,
                ]
            }),
        )
    }
}

fn extension(spectrum: &Spectrum, k: usize) -> Result<&[f64]> {
    if k >= spectrum.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside the {} computed modes", spectrum.len())));
    }
    spectrum.extension(k).ok_or_else(|| Error::InvalidArgument("spectrum has no interior extensions".into()))
}

/// Localization map of mode `k`; `dist` comes from [`node_distances`].
pub fn bk_map(spectrum: &Spectrum, k: usize, mesh: &Mesh, dist: &[f64]) -> Result<LocalizationMap> {
    let v = extension(spectrum, k)?;
    if v.len() != mesh.n_nodes() || dist.len() != mesh.n_nodes() {
        return Err(Error::Dimension { expected: mesh.n_nodes(), got: v.len().min(dist.len()) });
    }
    let mu = spectrum.mu[k];
    let s = mesh.boundary_length().sqrt();
    let b = v.iter().zip(dist).map(|(x, d)| s * x.abs() * (mu * d).exp()).collect();
    Ok(LocalizationMap { k, mu, values: v.to_vec(), b, dist: dist.to_vec(), floor: DISPLAY_FLOOR })
}

/// `U_k(δ) = √|∂Ω| max |V_k|` over distance bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub k: usize,
    pub width: f64,
    pub delta: Vec<f64>,
    pub u: Vec<f64>,
}

/// Bins nodes by distance to the boundary. Band 0 holds exactly the
/// boundary nodes; band `j ≥ 1` holds interior nodes with distance in
/// `[(j − 1/2)w, (j + 1/2)w)`. Interior nodes closer than `w/2` are left
/// out. Empty bands are omitted.
pub fn uk_profile(spectrum: &Spectrum, k: usize, mesh: &Mesh, dist: &[f64], width: f64) -> Result<RadialProfile> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("band width must be > 0, got {width}")));
    }
    let v = extension(spectrum, k)?;
    let s = mesh.boundary_length().sqrt();
    let max_d = dist.iter().copied().fold(0.0, f64::max);
    let nbins = (max_d / width + 0.5).floor() as usize + 1;
    let mut best = vec![f64::NAN; nbins];
    for i in 0..mesh.n_nodes() {
        let j = if mesh.is_boundary(i) {
            0
        } else {
            let j = (dist[i] / width + 0.5).floor() as usize;
            if j == 0 {
                continue;
            }
            j
        };
        let a = s * v[i].abs();
        if best[j].is_nan() || a > best[j] {
            best[j] = a;
        }
    }
    let (delta, u) = best.iter().enumerate().filter(|(_, u)| !u.is_nan()).map(|(j, &u)| (j as f64 * width, u)).unzip();
    Ok(RadialProfile { k, width, delta, u })
}

/// `k, delta, U` rows for several profiles.
pub fn write_profiles<W: Write>(w: &mut W, profiles: &[RadialProfile]) -> Result<()> {
    write_csv(
        w,
        &["k", "delta", "U"],
        profiles
            .iter()
            .flat_map(|p| p.delta.iter().zip(&p.u).map(move |(&d, &u)| vec![p.k.into(), d.into(), u.into()])),
    )
}

/// Step of the finite difference in `p`.
pub fn default_dp(p: f64) -> f64 {
    (1e-2 * p).max(1e-3)
}

/// Residuals of the energy identities for one eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormIdentityRow {
    pub k: usize,
    pub p: f64,
    pub dp: f64,
    pub mu: f64,
    /// `|Vᵀ(pM + K)V − μ|`.
    pub energy_residual: f64,
    /// `VᵀMV`.
    pub volume_norm: f64,
    /// Difference quotient of the tracked branch.
    pub dmu_dp: f64,
    /// `|VᵀMV − ∂_pμ|`.
    pub volume_residual: f64,
    /// `VᵀKV`.
    pub gradient_norm: f64,
    /// `|VᵀKV − (μ − p ∂_pμ)|`.
    pub gradient_residual: f64,
    /// Smallest squared `M_b` overlap with the matched multiplet at `p ± dp`.
    pub overlap: f64,
    pub tracked: bool,
}

/// Matches mode `k` of `base` to a multiplet of `other` by maximal squared
/// `M_b` overlap and returns the eigenvalue of the best-overlapping member.
fn track(base: &Spectrum, k: usize, other: &Spectrum, mats: &FemMatrices) -> (f64, f64) {
    let bv = base.boundary_vector_full(k, mats.n_nodes());
    let mbv = mats.mb.mul_vec(&bv[mats.n_interior..]);
    let overlaps: Vec<f64> = (0..other.len())
        .map(|j| {
            other
                .steklov
                .iter()
                .enumerate()
                .map(|(r, &g)| other.v[(r, j)] * mbv[g - mats.n_interior])
                .sum::<f64>()
                .powi(2)
        })
        .collect();
    let groups: Vec<Range<usize>> = other.multiplets();
    let best = groups
        .into_iter()
        .max_by(|a, b| {
            let sa: f64 = overlaps[a.clone()].iter().sum();
            let sb: f64 = overlaps[b.clone()].iter().sum();
            sa.total_cmp(&sb)
        })
        .expect("non-empty spectrum");
    let total: f64 = overlaps[best.clone()].iter().sum();
    let member = best.max_by(|&a, &b| overlaps[a].total_cmp(&overlaps[b])).unwrap();
    (other.mu[member], total)
}

/// Minimal squared overlap below which a branch counts as lost.
pub const TRACKING_OVERLAP: f64 = 0.5;

/// Checks the energy, volume and gradient identities of modes `ks` at
/// `p`, differentiating each branch with step `dp`. Below `p = dp` the
/// difference is one-sided.
pub fn norm_identities(
    mats: &FemMatrices,
    p: f64,
    ks: &[usize],
    dp: f64,
    exec: Execution,
) -> Result<Vec<NormIdentityRow>> {
    if !(dp > 0.0) {
        return Err(Error::InvalidArgument(format!("dp must be > 0, got {dp}")));
    }
    let count = ks.iter().max().map_or(0, |k| k + 1);
    if count == 0 {
        return Ok(Vec::new());
    }
    // Neighbours get a few spare modes so crossings stay visible.
    let wide = (count + 4).min(mats.n_boundary);
    let (factor, base) = solve_steklov(mats, p, count, exec)?;
    let base = base.with_extensions(&factor, mats.n_nodes(), exec)?;
    let lo_p = if p >= dp { p - dp } else { p };
    let (_, up) = solve_steklov(mats, p + dp, wide, exec)?;
    let down = if lo_p < p { Some(solve_steklov(mats, lo_p, wide, exec)?.1) } else { None };
    let a = mats.system(p);
    ks.iter()
        .map(|&k| {
            let v = base.extension(k).expect("extensions computed");
            let mu = base.mu[k];
            let form =
                |m: &crate::fem::SparseSymMatrix| -> f64 { m.mul_vec(v).iter().zip(v).map(|(x, y)| x * y).sum() };
            let (mu_up, o_up) = track(&base, k, &up, mats);
            let (mu_down, o_down) = match &down {
                Some(s) => track(&base, k, s, mats),
                None => (mu, 1.0),
            };
            let dmu_dp = (mu_up - mu_down) / (p + dp - lo_p);
            let volume_norm = form(&mats.m);
            let gradient_norm = form(&mats.k);
            let overlap = o_up.min(o_down);
            Ok(NormIdentityRow {
                k,
                p,
                dp,
                mu,
                energy_residual: (form(&a) - mu).abs(),
                volume_norm,
                dmu_dp,
                volume_residual: (volume_norm - dmu_dp).abs(),
                gradient_norm,
                gradient_residual: (gradient_norm - (mu - p * dmu_dp)).abs(),
                overlap,
                tracked: overlap >= TRACKING_OVERLAP,
            })
        })
        .collect()
}

/// `n` log-spaced points from `p_min` to `p_max`.
pub fn log_grid(p_min: f64, p_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(p_min > 0.0 && p_max > p_min && n >= 2) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < p_min < p_max and n >= 2, got ({p_min}, {p_max}, {n})"
        )));
    }
    let (a, b) = (p_min.ln(), p_max.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

/// Where a sweep's mesh came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepProvenance {
    pub domain: DomainSpec,
    pub n_nodes: usize,
    pub n_boundary: usize,
    pub h_max: f64,
}

/// Lowest eigenvalues over a grid of `p`, indexed by sorted position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PSweep {
    pub provenance: SweepProvenance,
    pub area: f64,
    pub perimeter: f64,
    pub grid: Vec<f64>,
    /// One ascending row per grid point.
    pub mu: Vec<Vec<f64>>,
}

impl PSweep {
    /// `p |Ω| / |∂Ω|`.
    pub fn small_p_asymptote(&self, p: f64) -> f64 {
        p * self.area / self.perimeter
    }

    /// `c √p`.
    pub fn large_p_asymptote(c: f64, p: f64) -> f64 {
        c * p.sqrt()
    }

    /// `p, k, mu` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_csv(
            w,
            &["p", "k", "mu"],
            self.grid
                .iter()
                .zip(&self.mu)
                .flat_map(|(&p, row)| row.iter().enumerate().map(move |(k, &mu)| vec![p.into(), k.into(), mu.into()])),
        )
    }
}

/// Solves at every grid point; points are distributed over workers and
/// the Schur blocks inside each point run sequentially.
pub fn p_sweep(
    domain: &Domain,
    mesh: &Mesh,
    mats: &FemMatrices,
    grid: &[f64],
    count: usize,
    exec: Execution,
) -> Result<PSweep> {
    if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("p grid must be positive and strictly increasing".into()));
    }
    let rows =
        map_range(exec, grid.len(), |i| solve_steklov(mats, grid[i], count, Execution::Sequential).map(|(_, s)| s.mu));
    Ok(PSweep {
        provenance: SweepProvenance {
            domain: domain.spec().clone(),
            n_nodes: mesh.n_nodes(),
            n_boundary: mesh.n_boundary,
            h_max: mesh.longest_edge(),
        },
        area: mats.area(),
        perimeter: mats.perimeter(),
        grid: grid.to_vec(),
        mu: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `p, k, abs_ak` rows.
pub fn write_ak<W: Write>(w: &mut W, rows: &[(f64, Vec<f64>)]) -> Result<()> {
    write_csv(
        w,
        &["p", "k", "abs_ak"],
        rows.iter()
            .flat_map(|(p, ak)| ak.iter().enumerate().map(move |(k, a)| vec![(*p).into(), k.into(), a.abs().into()])),
    )
}
