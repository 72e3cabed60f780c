//! One function per command. Each writes its CSVs into the output
//! directory and returns the summary stored under `results`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};

use serde_json::{json, Value};
use steklov::analysis::{self, CLUSTER_TOL, SYMMETRY_THRESHOLD, TRACKING_OVERLAP};
use steklov::dtn::{self, Spectrum, DEGENERACY_TOL};
use steklov::fem::{self, FemMatrices};
use steklov::output::{self, Cell};
use steklov::{analytic, conjecture, greens, mesh, Domain, DomainSpec, Mesh};

use crate::config::{Command, Method, RunConfig};
use crate::report::{DomainMetrics, MeshMetrics, Report, Timings};
use crate::{plots, CliError};

/// Shared state of a run.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    timings: Timings,
    tolerances: BTreeMap<&'static str, f64>,
    files: Vec<String>,
    passed: Option<bool>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.files.push(name.to_owned());
        self.cfg.out.join(name)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.path(name)).map_err(CliError::Io)?))
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> steklov::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        write(&mut w)?;
        w.flush().map_err(CliError::Io)
    }

    fn check(&mut self, ok: bool) {
        self.passed = Some(self.passed.unwrap_or(true) && ok);
    }
}

/// Executes `cfg` and writes `report.json`. Returns whether every check
/// of the command passed.
pub fn run(cfg: &RunConfig) -> Result<bool, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(CliError::Io)?;
    let mut ctx =
        Ctx { cfg, timings: Timings::default(), tolerances: BTreeMap::new(), files: Vec::new(), passed: None };

    if cfg.command == Command::EmitPlots {
        let written = plots::emit(&cfg.out)?;
        ctx.files = written.clone();
        let report = Report {
            command: cfg.command.name(),
            config: cfg,
            workers: steklov::par::worker_count(),
            domain: None,
            mesh: None,
            timings: ctx.timings,
            tolerances: ctx.tolerances,
            passed: None,
            files: ctx.files,
            results: json!({ "scripts": written }),
        };
        report.write(&cfg.out).map_err(CliError::Io)?;
        return Ok(true);
    }

    let spec = cfg.domain.clone().expect("every solving command has a domain");
    let domain = ctx.timings.time("domain", || Domain::new(spec))?;
    let mesh = ctx.timings.time("mesh", || match &cfg.mesh {
        Some(path) => mesh::import_mesh(path),
        None => mesh::generate_mesh(&domain, cfg.h),
    })?;
    let mats = ctx.timings.time("assemble", || fem::assemble(&mesh))?;
    ctx.tolerances.insert("degeneracy", DEGENERACY_TOL);

    let results = match cfg.command {
        Command::Mesh => cmd_mesh(&mut ctx, &domain, &mesh)?,
        Command::Solve => cmd_solve(&mut ctx, &mesh, &mats)?,
        Command::ValidateDisk => cmd_validate_disk(&mut ctx, &mesh, &mats)?,
        Command::ValidateRect => cmd_validate_rect(&mut ctx, &mesh, &mats)?,
        Command::Sweep => cmd_sweep(&mut ctx, &domain, &mesh, &mats)?,
        Command::Ck => cmd_ck(&mut ctx, &domain, &mats)?,
        Command::Ak => cmd_ak(&mut ctx, &domain, &mats)?,
        Command::Localize => cmd_localize(&mut ctx, &domain, &mesh, &mats)?,
        Command::Norms => cmd_norms(&mut ctx, &mats)?,
        Command::GreenSolve => cmd_green(&mut ctx, &mats)?,
        Command::EmitPlots => unreachable!(),
    };
    let passed = ctx.passed;
    let report = Report {
        command: cfg.command.name(),
        config: cfg,
        workers: steklov::par::worker_count(),
        domain: Some(DomainMetrics::of(&domain)),
        mesh: Some(MeshMetrics::of(&mesh)),
        timings: ctx.timings,
        tolerances: ctx.tolerances,
        passed,
        files: ctx.files,
        results,
    };
    report.write(&cfg.out).map_err(CliError::Io)?;
    Ok(passed.unwrap_or(true))
}

/// The `count` lowest eigenpairs by the configured method.
fn spectrum(ctx: &mut Ctx, mats: &FemMatrices, p: f64, count: usize) -> Result<Spectrum, CliError> {
    let cfg = ctx.cfg;
    let exec = cfg.execution();
    let sp = ctx.timings.time("solve", || match cfg.method {
        Method::Fem => dtn::solve_steklov(mats, p, count, exec).map(|(_, s)| s),
        Method::Green => greens::dtn_spectrum_via_green(mats, cfg.q, p, cfg.m, count, exec),
    })?;
    Ok(sp)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn cmd_mesh(ctx: &mut Ctx, domain: &Domain, m: &Mesh) -> Result<Value, CliError> {
    let path = ctx.path("mesh.txt");
    mesh::export_mesh(m, &path)?;
    let boundary_tol = if domain.is_polygon() { 1e-9 } else { 1e-6 };
    let opts = mesh::ValidationOptions { domain: Some(domain), boundary_tol, ..Default::default() };
    let violations = mesh::validate_mesh(m, &opts);
    let min_angle =
        (0..m.triangles.len()).flat_map(|t| m.triangle_angles(t)).fold(f64::INFINITY, f64::min).to_degrees();
    ctx.tolerances.insert("min_angle_deg", mesh::MIN_ANGLE_DEG);
    ctx.tolerances.insert("boundary_distance", boundary_tol);
    Ok(json!({
        "min_angle_deg": min_angle,
        "violations": violations.len(),
        "first_violations": violations.iter().take(5).map(|v| format!("{v:?}")).collect::<Vec<_>>(),
    }))
}

fn cmd_solve(ctx: &mut Ctx, mesh: &Mesh, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let sp = spectrum(ctx, mats, cfg.p, cfg.count)?;
    ctx.csv("spectrum.csv", |w| output::write_spectrum(w, &sp))?;
    write_modes(ctx, mesh, &sp)?;
    Ok(json!({ "p": cfg.p, "method": cfg.method, "mu": sp.mu }))
}

/// Boundary traces: `node, x, y, v0, v1, ...`.
fn write_modes(ctx: &mut Ctx, mesh: &Mesh, sp: &Spectrum) -> Result<(), CliError> {
    let names: Vec<String> = (0..sp.len()).map(|k| format!("v{k}")).collect();
    let mut header = vec!["node", "x", "y"];
    header.extend(names.iter().map(String::as_str));
    ctx.csv("modes.csv", |w| {
        output::write_csv(
            w,
            &header,
            sp.steklov.iter().enumerate().map(|(a, &g)| {
                let x = mesh.nodes[g];
                let mut row = vec![Cell::from(g), x.x.into(), x.y.into()];
                row.extend((0..sp.len()).map(|k| Cell::from(sp.v[(a, k)])));
                row
            }),
        )
    })
}

fn cmd_validate_disk(ctx: &mut Ctx, mesh: &Mesh, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let Some(DomainSpec::Disk { radius }) = cfg.domain else { unreachable!("checked by the config") };
    let sp = spectrum(ctx, mats, cfg.p, cfg.count)?;
    let exact: Vec<f64> = analytic::disk_spectrum(radius, cfg.p, cfg.count).iter().map(|e| e.mu).collect();
    let points: Vec<_> = sp.steklov.iter().map(|&g| mesh.nodes[g]).collect();
    let groups = analytic::disk_mode_groups(radius, cfg.p, cfg.count, &points);
    let rmse = dtn::eigenfunction_rmse(&sp, mats, &groups, 5e-2);
    validation_output(ctx, "validate_disk.csv", &sp.mu, &exact, None, rmse)
}

fn cmd_validate_rect(ctx: &mut Ctx, mesh: &Mesh, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let Some(DomainSpec::Rectangle { b1, b2 }) = cfg.domain else { unreachable!("checked by the config") };
    let sp = spectrum(ctx, mats, cfg.p, cfg.count)?;
    let pairs = analytic::rectangle_spectrum(b1, b2, cfg.p, cfg.count)?;
    let exact: Vec<f64> = pairs.iter().map(|e| e.mu).collect();
    let residual: Vec<f64> = pairs.iter().map(|e| e.residual()).collect();
    let points: Vec<_> = sp.steklov.iter().map(|&g| mesh.nodes[g]).collect();
    let groups = analytic::rectangle_mode_groups(b1, b2, cfg.p, cfg.count, &points)?;
    let rmse = dtn::eigenfunction_rmse(&sp, mats, &groups, 5e-2);
    validation_output(ctx, "validate_rect.csv", &sp.mu, &exact, Some(&residual), rmse)
}

fn validation_output(
    ctx: &mut Ctx,
    name: &str,
    mu: &[f64],
    exact: &[f64],
    residual: Option<&[f64]>,
    rmse: steklov::Result<Vec<f64>>,
) -> Result<Value, CliError> {
    let tol = ctx.cfg.tol;
    let err = max_abs_diff(mu, exact);
    // Eigenvectors too far from the analytic eigenspaces fail the check
    // instead of aborting the run.
    let (rmse, rmse_error) = match rmse {
        Ok(r) => (r, None),
        Err(e) => (vec![f64::NAN; mu.len()], Some(e.to_string())),
    };
    let worst_rmse = if rmse_error.is_some() { f64::NAN } else { rmse.iter().copied().fold(0.0, f64::max) };
    let worst_residual = residual.map(|r| r.iter().map(|x| x.abs()).fold(0.0, f64::max));
    ctx.csv(name, |w| {
        output::write_csv(
            w,
            &["k", "mu_fem", "mu_exact", "abs_err", "residual", "rmse"],
            (0..mu.len()).map(|k| {
                let res = residual.map_or(Cell::from(""), |r| r[k].into());
                vec![k.into(), mu[k].into(), exact[k].into(), (mu[k] - exact[k]).abs().into(), res, rmse[k].into()]
            }),
        )
    })?;
    ctx.tolerances.insert("eigenvalue", tol);
    ctx.tolerances.insert("rmse", tol);
    ctx.check(err <= tol && worst_rmse <= tol);
    if let Some(r) = worst_residual {
        ctx.tolerances.insert("root_residual", 1e-10);
        ctx.check(r <= 1e-10);
    }
    Ok(json!({
        "max_abs_err": err,
        "max_rmse": worst_rmse,
        "rmse_error": rmse_error,
        "max_root_residual": worst_residual,
    }))
}

fn cmd_sweep(ctx: &mut Ctx, domain: &Domain, mesh: &Mesh, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    if cfg.method == Method::Green {
        return Err(CliError::Config("sweep supports --method fem only".into()));
    }
    let exec = cfg.execution();
    let sweep = ctx.timings.time("solve", || analysis::p_sweep(domain, mesh, mats, &cfg.p_grid, cfg.count, exec))?;
    ctx.csv("sweep.csv", |w| sweep.write_csv(w))?;
    ctx.csv("sweep_meta.csv", |w| {
        output::write_csv(w, &["area", "perimeter"], [vec![sweep.area.into(), sweep.perimeter.into()]])
    })?;
    let last = sweep.mu.last().map(|r| r[0]).unwrap_or(f64::NAN);
    let p_last = *cfg.p_grid.last().unwrap();
    Ok(json!({
        "points": cfg.p_grid.len(),
        "area": sweep.area,
        "perimeter": sweep.perimeter,
        "mu0_over_sqrt_p_at_p_max": last / p_last.sqrt(),
    }))
}

fn cmd_ck(ctx: &mut Ctx, domain: &Domain, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let sp = spectrum(ctx, mats, cfg.p, cfg.count)?;
    let tol = cfg.tol;
    let report = conjecture::compare_conjecture(domain, cfg.p, cfg.count, |_| tol, |_, _, _| Ok(sp))?;
    ctx.csv("ck.csv", |w| report.write_csv(w))?;
    println!("{}", report.table());
    ctx.tolerances.insert("ck", tol);
    ctx.check(report.flagged().is_empty());
    Ok(json!({
        "p": cfg.p,
        "max_abs_diff": report.max_abs_diff(),
        "flagged": report.flagged(),
        "rows": report.rows,
    }))
}

fn cmd_ak(ctx: &mut Ctx, domain: &Domain, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for &p in &cfg.p_grid {
        let sp = spectrum(ctx, mats, p, cfg.count)?;
        let sp = analysis::align_clusters(&sp, mats, CLUSTER_TOL)?;
        let ak = analysis::ak_coefficients(&sp, mats)?;
        audits.push(json!({ "p": p, "audit": analysis::symmetry_audit(&ak, domain, SYMMETRY_THRESHOLD) }));
        rows.push((p, ak));
    }
    ctx.csv("ak.csv", |w| analysis::write_ak(w, &rows))?;
    ctx.tolerances.insert("symmetry_threshold", SYMMETRY_THRESHOLD);
    ctx.tolerances.insert("cluster", CLUSTER_TOL);
    Ok(json!({ "audits": audits }))
}

fn cmd_localize(ctx: &mut Ctx, domain: &Domain, mesh: &Mesh, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let exec = cfg.execution();
    let count = cfg.modes_needed();
    let (factor, sp) = ctx.timings.time("solve", || dtn::solve_steklov(mats, cfg.p, count, exec))?;
    let sp = ctx.timings.time("extend", || sp.with_extensions(&factor, mats.n_nodes(), exec))?;
    let dist = ctx.timings.time("distances", || analysis::node_distances(mesh, domain, exec));
    let mut profiles = Vec::new();
    let mut summary = Vec::new();
    for &k in &cfg.k {
        let map = analysis::bk_map(&sp, k, mesh, &dist)?;
        ctx.csv(&format!("localization_k{k}.csv"), |w| map.write_csv(w, mesh))?;
        summary.push(json!({ "k": k, "mu": sp.mu[k], "max_b": map.max_b() }));
        profiles.push(analysis::uk_profile(&sp, k, mesh, &dist, cfg.width)?);
    }
    ctx.csv("profiles.csv", |w| analysis::write_profiles(w, &profiles))?;
    ctx.csv("profile_modes.csv", |w| {
        output::write_csv(w, &["k", "mu"], cfg.k.iter().map(|&k| vec![k.into(), sp.mu[k].into()]))
    })?;
    ctx.tolerances.insert("display_floor", analysis::DISPLAY_FLOOR);
    Ok(json!({ "p": cfg.p, "width": cfg.width, "modes": summary }))
}

fn cmd_norms(ctx: &mut Ctx, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let exec = cfg.execution();
    let rows = ctx.timings.time("solve", || analysis::norm_identities(mats, cfg.p, &cfg.k, cfg.dp, exec))?;
    ctx.csv("norms.csv", |w| {
        output::write_csv(
            w,
            &[
                "k",
                "p",
                "mu",
                "energy_residual",
                "volume_norm",
                "dmu_dp",
                "volume_residual",
                "gradient_norm",
                "gradient_residual",
                "overlap",
                "tracked",
            ],
            rows.iter().map(|r| {
                vec![
                    r.k.into(),
                    r.p.into(),
                    r.mu.into(),
                    r.energy_residual.into(),
                    r.volume_norm.into(),
                    r.dmu_dp.into(),
                    r.volume_residual.into(),
                    r.gradient_norm.into(),
                    r.gradient_residual.into(),
                    r.overlap.into(),
                    r.tracked.into(),
                ]
            }),
        )
    })?;
    ctx.tolerances.insert("dp", cfg.dp);
    ctx.tolerances.insert("tracking_overlap", TRACKING_OVERLAP);
    let worst = |f: fn(&analysis::NormIdentityRow) -> f64| {
        rows.iter().filter(|r| r.tracked).map(|r| f(r).abs()).fold(0.0, f64::max)
    };
    Ok(json!({
        "max_energy_residual": worst(|r| r.energy_residual),
        "max_volume_residual": worst(|r| r.volume_residual),
        "max_gradient_residual": worst(|r| r.gradient_residual),
        "untracked": rows.iter().filter(|r| !r.tracked).map(|r| r.k).collect::<Vec<_>>(),
    }))
}

fn cmd_green(ctx: &mut Ctx, mats: &FemMatrices) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let exec = cfg.execution();
    let (neumann, robin) = ctx.timings.time("robin_bases", || -> steklov::Result<_> {
        Ok((greens::robin_eigenbasis(mats, 0.0, cfg.m)?, greens::robin_eigenbasis(mats, cfg.q, cfg.m)?))
    })?;
    let green = ctx
        .timings
        .time("green_solve", || greens::dtn_spectrum_with_bases(mats, &neumann, &robin, cfg.p, cfg.count, exec))?;
    let fem = ctx.timings.time("schur_solve", || dtn::solve_steklov(mats, cfg.p, cfg.count, exec))?.1;
    let info = greens::GreenRunInfo::new(mats, &neumann, &robin, cfg.p);
    ctx.csv("green.csv", |w| {
        output::write_csv(
            w,
            &["k", "mu_green", "mu_fem", "abs_diff"],
            (0..cfg.count)
                .map(|k| vec![k.into(), green.mu[k].into(), fem.mu[k].into(), (green.mu[k] - fem.mu[k]).abs().into()]),
        )
    })?;
    let diff = max_abs_diff(&green.mu, &fem.mu);
    ctx.tolerances.insert("method_agreement", cfg.tol);
    ctx.check(diff <= cfg.tol);
    Ok(json!({ "max_abs_diff": diff, "green": info }))
}
