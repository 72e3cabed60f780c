use std::f64::consts::PI;

use faer::Mat;
use proptest::prelude::*;
use steklov::analytic::{self, bessel_i};
use steklov::dtn::{self, BoundaryPartition, BoundaryRole};
use steklov::fem::{self, FemMatrices};
use steklov::par::Execution;
use steklov::{mesh, output, Domain, DomainSpec, Mesh};

fn setup(spec: DomainSpec, h: f64) -> (Mesh, FemMatrices) {
    let d = Domain::new(spec).unwrap();
    let m = mesh::generate_mesh(&d, h).unwrap();
    let mats = fem::assemble(&m).unwrap();
    (m, mats)
}

fn steklov_points(m: &Mesh, s: &dtn::Spectrum) -> Vec<steklov::Point> {
    s.steklov.iter().map(|&g| m.nodes[g]).collect()
}

fn mb_gram(s: &dtn::Spectrum, mb: &Mat<f64>) -> Mat<f64> {
    s.v.transpose() * mb * &s.v
}

#[test]
fn neumann_limit_has_constant_ground_state() {
    let (_, mats) = setup(DomainSpec::Koch { generation: 1, side: 2.0 }, 0.05);
    let part = BoundaryPartition::steklov(mats.n_boundary);
    let f = part.factor(&mats, 0.0).unwrap();
    let op = dtn::build_dtn(&mats, &f, 0.0, &part, Execution::Parallel).unwrap();
    let n = op.dim();
    let row_max = (0..n).map(|i| (0..n).map(|j| op.s[(i, j)]).sum::<f64>().abs()).fold(0.0, f64::max);
    assert!(row_max < 1e-10, "S·1 = {row_max}");
    let s = dtn::eigensolve(&op, 4).unwrap();
    assert!(s.mu[0].abs() < 1e-10);
    let c = mats.perimeter().powf(-0.5);
    assert!(s.boundary_vector(0).iter().all(|v| (v - c).abs() < 1e-8));
}

#[test]
fn disk_eigenvalues() {
    let (m, mats) = setup(DomainSpec::Disk { radius: 1.0 }, 0.04);
    for p in [0.0, 1.0, 10.0] {
        let (_, s) = dtn::solve_steklov(&mats, p, 7, Execution::Parallel).unwrap();
        let exact = analytic::disk_spectrum(1.0, p, 7);
        for (k, e) in exact.iter().enumerate() {
            assert!((s.mu[k] - e.mu).abs() < 5e-3 * e.mu.max(1.0), "p = {p}, k = {k}: {} vs {}", s.mu[k], e.mu);
        }
        let groups = analytic::disk_mode_groups(1.0, p, 7, &steklov_points(&m, &s));
        let rmse = dtn::eigenfunction_rmse(&s, &mats, &groups, 0.05).unwrap();
        assert!(rmse.iter().all(|&e| e < 5e-3), "p = {p}: {rmse:?}");
    }
}

#[test]
fn rectangle_eigenvalues() {
    let (m, mats) = setup(DomainSpec::Rectangle { b1: 1.0, b2: 2.0 }, 0.04);
    let p = 1.0;
    let (_, s) = dtn::solve_steklov(&mats, p, 6, Execution::Parallel).unwrap();
    let exact = analytic::rectangle_spectrum(1.0, 2.0, p, 6).unwrap();
    for (k, e) in exact.iter().enumerate() {
        assert!((s.mu[k] - e.mu).abs() < 1e-2 * e.mu.max(1.0), "k = {k}: {} vs {}", s.mu[k], e.mu);
    }
    let groups = analytic::rectangle_mode_groups(1.0, 2.0, p, 6, &steklov_points(&m, &s)).unwrap();
    let rmse = dtn::eigenfunction_rmse(&s, &mats, &groups, 0.05).unwrap();
    assert!(rmse.iter().all(|&e| e < 1e-2), "{rmse:?}");
}

#[test]
fn rmse_of_exact_traces_vanishes() {
    let (m, mats) = setup(DomainSpec::Disk { radius: 1.0 }, 0.1);
    let (_, mut s) = dtn::solve_steklov(&mats, 1.0, 3, Execution::Sequential).unwrap();
    let points = steklov_points(&m, &s);
    let groups = analytic::disk_mode_groups(1.0, 1.0, 3, &points);
    // Replace the numeric eigenvectors by their analytic counterparts.
    let exact = analytic::disk_spectrum(1.0, 1.0, 3);
    let trace = |k: usize| -> Vec<f64> { points.iter().map(|&x| exact[k].value(x)).collect() };
    let op_mb = Mat::from_fn(s.steklov.len(), s.steklov.len(), |i, j| {
        mats.mb.get(s.steklov[i] - mats.n_interior, s.steklov[j] - mats.n_interior)
    });
    for k in 0..3 {
        let t = trace(k);
        let col = Mat::from_fn(t.len(), 1, |i, _| t[i]);
        let nrm = (col.transpose() * &op_mb * &col)[(0, 0)].sqrt();
        for (i, x) in t.iter().enumerate() {
            s.v[(i, k)] = x / nrm;
        }
    }
    let rmse = dtn::eigenfunction_rmse(&s, &mats, &groups, 0.1).unwrap();
    assert!(rmse.iter().all(|&e| e < 1e-12), "{rmse:?}");
}

#[test]
fn extension_of_ground_state() {
    let (m, mats) = setup(DomainSpec::Disk { radius: 1.0 }, 0.04);
    let (f, s) = dtn::solve_steklov(&mats, 1.0, 3, Execution::Parallel).unwrap();
    let s = s.with_extensions(&f, mats.n_nodes(), Execution::Parallel).unwrap();
    let v = s.extension(0).unwrap();
    let c = (2.0 * PI).powf(-0.5);
    let i01 = bessel_i(0, 1.0).unwrap().0;
    let rms =
        (m.nodes.iter().zip(v).map(|(x, u)| (u - c * bessel_i(0, x.norm()).unwrap().0 / i01).powi(2)).sum::<f64>()
            / v.len() as f64)
            .sqrt();
    assert!(rms < 5e-3, "{rms}");

    // (pM + K)V = μ M_b V with the trace as data.
    let a = mats.system(1.0);
    let b = mats.boundary_mass_full();
    for k in 0..3 {
        let v = s.extension(k).unwrap();
        let lhs = a.mul_vec(v);
        let rhs = b.mul_vec(v);
        let r = lhs.iter().zip(&rhs).map(|(x, y)| (x - s.mu[k] * y).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-9, "k = {k}: residual {r}");
        let single = dtn::extend_eigenfunction(
            &mats,
            &f,
            1.0,
            &BoundaryPartition::steklov(mats.n_boundary),
            &s.boundary_vector(k),
        )
        .unwrap();
        let d = single.iter().zip(v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }
}

#[test]
fn spectrum_contract() {
    let (_, mats) = setup(DomainSpec::mixed_angle_octagon(), 0.06);
    let part = BoundaryPartition::steklov(mats.n_boundary);
    for p in [0.0, 0.3, 30.0] {
        let f = part.factor(&mats, p).unwrap();
        let op = dtn::build_dtn(&mats, &f, p, &part, Execution::Parallel).unwrap();
        let s = dtn::eigensolve(&op, 12).unwrap();
        assert!(s.mu.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.mu[0] >= -1e-9);
        let g = mb_gram(&s, &op.mb);
        for i in 0..s.len() {
            for j in 0..s.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-9);
            }
        }
        // Sign convention: nonnegative boundary integral.
        let w: Vec<f64> = (0..op.dim()).map(|i| op.mb.row(i).iter().sum()).collect();
        for k in 0..s.len() {
            let integral: f64 = (0..op.dim()).map(|i| w[i] * s.v[(i, k)]).sum();
            assert!(integral >= -1e-9);
        }
        for r in s.multiplets() {
            let lo = s.mu[r.start];
            assert!(s.mu[r.clone()]
                .iter()
                .all(|m| (m - lo).abs() <= dtn::DEGENERACY_TOL * lo.max(1.0) * r.len() as f64));
        }
    }
    assert!(dtn::eigensolve(
        &dtn::build_dtn(&mats, &part.factor(&mats, 1.0).unwrap(), 1.0, &part, Execution::Sequential).unwrap(),
        mats.n_boundary + 1
    )
    .is_err());
}

#[test]
fn factor_mismatch_rejected() {
    let (_, mats) = setup(DomainSpec::square(1.0), 0.2);
    let part = BoundaryPartition::steklov(mats.n_boundary);
    let f = part.factor(&mats, 1.0).unwrap();
    assert!(dtn::build_dtn(&mats, &f, 2.0, &part, Execution::Sequential).is_err());
    let mut roles = vec![BoundaryRole::Steklov; mats.n_boundary];
    roles[0] = BoundaryRole::NeumannZero;
    let mixed = BoundaryPartition::from_roles(roles).unwrap();
    assert!(dtn::build_dtn(&mats, &f, 1.0, &mixed, Execution::Sequential).is_err());
    assert!(BoundaryPartition::steklov(3).factor(&mats, 1.0).is_err());
}

#[test]
fn mixed_boundary_conditions() {
    let (m, mats) = setup(DomainSpec::square(2.0), 0.05);
    // Dirichlet on the left side, Neumann on the right, Steklov elsewhere.
    let role = |x: steklov::Point| {
        if x.x < 1e-12 {
            BoundaryRole::DirichletZero
        } else if x.x > 2.0 - 1e-12 {
            BoundaryRole::NeumannZero
        } else {
            BoundaryRole::Steklov
        }
    };
    let part = BoundaryPartition::from_fn(&m, role).unwrap();
    assert!(!part.is_pure_steklov());
    assert!(BoundaryPartition::from_fn(&m, |_| BoundaryRole::DirichletZero).is_err());
    let f = part.factor(&mats, 0.0).unwrap();
    let op = dtn::build_dtn(&mats, &f, 0.0, &part, Execution::Parallel).unwrap();
    assert_eq!(op.dim(), part.roles().iter().filter(|&&r| r == BoundaryRole::Steklov).count());
    let s = dtn::eigensolve(&op, 4).unwrap();
    assert!(s.mu[0] > 1e-3, "a Dirichlet arc lifts the ground state: {}", s.mu[0]);
    let s = s.with_extensions(&f, mats.n_nodes(), Execution::Parallel).unwrap();
    let v = s.extension(0).unwrap();
    for (i, &r) in part.roles().iter().enumerate() {
        if r == BoundaryRole::DirichletZero {
            assert_eq!(v[mats.n_interior + i], 0.0);
        }
    }
    // Pinning an arc to zero raises the ground state above the pure problem.
    let pure = BoundaryPartition::steklov(mats.n_boundary);
    let f0 = pure.factor(&mats, 0.0).unwrap();
    let s0 = dtn::eigensolve(&dtn::build_dtn(&mats, &f0, 0.0, &pure, Execution::Parallel).unwrap(), 2).unwrap();
    assert!(s.mu[0] > s0.mu[0]);
}

#[test]
fn sequential_and_parallel_agree() {
    let (_, mats) = setup(DomainSpec::Koch { generation: 2, side: 2.0 }, 0.04);
    assert!(mats.n_boundary > 64);
    let part = BoundaryPartition::steklov(mats.n_boundary);
    let f = part.factor(&mats, 2.0).unwrap();
    let a = dtn::build_dtn(&mats, &f, 2.0, &part, Execution::Sequential).unwrap();
    let b = dtn::build_dtn(&mats, &f, 2.0, &part, Execution::Parallel).unwrap();
    assert_eq!(a.s, b.s);
    let sa = dtn::eigensolve(&a, 8).unwrap();
    let sb = dtn::eigensolve(&b, 8).unwrap();
    assert_eq!(sa.mu, sb.mu);
    assert_eq!(sa.v, sb.v);
    let ea = sa.with_extensions(&f, mats.n_nodes(), Execution::Sequential).unwrap();
    let eb = sb.with_extensions(&f, mats.n_nodes(), Execution::Parallel).unwrap();
    assert_eq!(ea.extensions, eb.extensions);
}

#[test]
fn writers() {
    let (_, mats) = setup(DomainSpec::square(1.0), 0.2);
    let (_, s) = dtn::solve_steklov(&mats, 1.0, 3, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    output::write_spectrum(&mut buf, &s).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,mu");
    assert_eq!(lines.len(), 4);
    for (k, line) in lines[1..].iter().enumerate() {
        let (idx, mu) = line.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), k);
        assert_eq!(mu.parse::<f64>().unwrap(), s.mu[k]);
    }
    let u = s.boundary_vector_full(1, mats.n_nodes());
    let mut buf = Vec::new();
    output::write_node_vector(&mut buf, &u).unwrap();
    let back: Vec<f64> = String::from_utf8(buf).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(back, u);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eigenvalues_increase_with_p(p in 0.0f64..20.0, dp in 1e-3f64..5.0, which in 0usize..3) {
        let spec = [
            DomainSpec::square(1.0),
            DomainSpec::Ellipse { a: 1.5, b: 1.0 },
            DomainSpec::Triangle { side: 2.0, angle1: PI / 6.0, angle2: PI / 3.0 },
        ][which]
            .clone();
        let (_, mats) = setup(spec, 0.15);
        let (_, a) = dtn::solve_steklov(&mats, p, 5, Execution::Sequential).unwrap();
        let (_, b) = dtn::solve_steklov(&mats, p + dp, 5, Execution::Sequential).unwrap();
        for k in 0..5 {
            prop_assert!(b.mu[k] >= a.mu[k] - 1e-10, "k = {}: {} < {}", k, b.mu[k], a.mu[k]);
        }
    }
}
