//! Acceptance report: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use helimag::demag::build_demag_tensor;
use helimag::dynamics::{gilbert_residual, llg_rhs, simulate, Scheme, SolverConfig, Trajectory};
use helimag::energy::{
    conservation_residual, default_test_fields, effective_field, energy, energy_law_residual, helicity_identity_gap,
    weak_form_residual,
};
use helimag::grid::{
    boundary_pairing, helical_gradient_with, helical_laplacian_composed, inner_product, l2_norm, max_boundary_flux,
    Boundary,
};
use helimag::io::config::{format_config, load_config, parse_config, RunConfig};
use helimag::io::series::{format_series, parse_series, series_records};
use helimag::io::snapshot::{format_snapshot, parse_snapshot};
use helimag::lab::{
    gronwall_check, poincare_check, poincare_check_pair, strong_strong_experiment, strong_strong_sweep,
    weak_strong_experiment,
};
use helimag::lowerorder::{anisotropy_op, estimate_pi_norm, pi_op};
use helimag::{AppliedField, DemagTensor, Grid, MagnetizationField, MaterialParams, Vec3, VectorField};

type Check = Result<(bool, String), String>;

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_orders(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2}")).collect();
    format!("[{}]", parts.join(", "))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn config(name: &str) -> Result<RunConfig, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    load_config(&path).map_err(e)
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> VectorField {
    let v = (0..grid.len())
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    VectorField::from_values(grid, v).unwrap()
}

fn random_unit(grid: Grid, rng: &mut ChaCha8Rng) -> MagnetizationField {
    loop {
        let f = random_field(grid, rng);
        if f.values().iter().all(|v| v.norm() > 1e-3) {
            return MagnetizationField::project(f).unwrap();
        }
    }
}

fn c1_helicity() -> Check {
    let p = MaterialParams {
        ell_ex: 0.4,
        kappa: 0.3,
        ..MaterialParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_const: f64 = 0.0;
    for cells in [[1, 1, 1], [4, 3, 2], [6, 6, 6]] {
        let g = Grid::new([1.0, 0.7, 0.5], cells).map_err(e)?;
        for _ in 0..10 {
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let m = MagnetizationField::uniform(g, d).map_err(e)?;
            worst_const = worst_const.max(helicity_identity_gap(&m, &p).map_err(e)?);
        }
    }
    let q = 2.0 * std::f64::consts::PI;
    let mut gaps = Vec::new();
    let mut scale: f64 = 0.0;
    for n in [8, 16, 32] {
        let g = Grid::new([1.0, 0.5, 0.5], [n, n / 2, n / 2]).map_err(e)?;
        let m = MagnetizationField::project(VectorField::from_fn(g, |x| {
            Vec3::new(0.0, (q * x.x()).cos(), (q * x.x()).sin())
        }))
        .map_err(e)?;
        let zero = VectorField::zeros(g);
        let b = energy(&m, &zero, &p, None).map_err(e)?;
        scale = scale.max(b.helical_total.abs()).max(b.exchange.abs());
        gaps.push(helicity_identity_gap(&m, &p).map_err(e)?);
    }
    let ord = orders(&gaps);
    let rounding = gaps.iter().all(|g| *g <= 1e-12 * scale.max(1.0));
    let ordered = ord.iter().all(|o| *o >= 1.0);
    Ok((
        worst_const <= 1e-12 && (ordered || rounding),
        format!(
            "constant fields max gap {worst_const:.1e} (tol 1e-12); helix gaps {} orders {} ({})",
            fmt(&gaps),
            fmt_orders(&ord),
            if rounding { "identity exact to rounding" } else { "converging" }
        ),
    ))
}

fn u_of(x: Vec3) -> Vec3 {
    Vec3::new((2.0 * x.x()).sin(), x.y() * x.z().cos(), (x.x() + 0.5 * x.y()).cos())
}

fn v_of(x: Vec3) -> Vec3 {
    Vec3::new(x.y().cos() * x.z(), (x.x() * x.x() + 0.3).sqrt(), (1.5 * x.z()).sin() + x.x())
}

fn c2_calculus() -> Check {
    let p = MaterialParams {
        ell_ex: 0.7,
        kappa: 0.4,
        ..MaterialParams::default()
    };
    let mut leibniz = Vec::new();
    let mut sbp = Vec::new();
    let mut flux = Vec::new();
    let mut hs = Vec::new();
    for n in [8, 16, 32] {
        let g = Grid::new([1.0, 0.8, 0.6], [n, n, n]).map_err(e)?;
        let u = VectorField::from_fn(g, u_of);
        let v = VectorField::from_fn(g, v_of);
        let free = Boundary::Free;
        let gu = helical_gradient_with(&u, &p, free).map_err(e)?;
        let gv = helical_gradient_with(&v, &p, free).map_err(e)?;
        let uv = u.cross(&v).map_err(e)?;
        let guv = helical_gradient_with(&uv, &p, free).map_err(e)?;
        let mut sq = 0.0;
        for a in 0..3 {
            let rhs = gu.components[a]
                .cross(&v)
                .map_err(e)?
                .add(&u.cross(&gv.components[a]).map_err(e)?)
                .map_err(e)?;
            sq += l2_norm(&guv.components[a].sub(&rhs).map_err(e)?).powi(2);
        }
        leibniz.push(sq.sqrt());
        let lap = helical_laplacian_composed(&v, &p, free).map_err(e)?;
        let boundary = p.ell_ex * boundary_pairing(&u, &gv).map_err(e)?;
        sbp.push((gu.inner(&gv).map_err(e)? - boundary + inner_product(&u, &lap).map_err(e)?).abs());
        let m = VectorField::from_fn(g, |x| u_of(x).normalized().unwrap());
        flux.push(max_boundary_flux(&m, &p));
        hs.push(g.spacing().iter().copied().fold(0.0, f64::max));
    }
    let (ol, os) = (orders(&leibniz), orders(&sbp));
    let flux_ok = flux.iter().zip(&hs).all(|(f, h)| *f <= h * h);
    Ok((
        ol.iter().chain(&os).all(|o| *o >= 1.0) && flux_ok,
        format!(
            "Leibniz {} orders {}; integration by parts {} orders {}; ghost flux {} (<= h^2)",
            fmt(&leibniz),
            fmt_orders(&ol),
            fmt(&sbp),
            fmt_orders(&os),
            fmt(&flux)
        ),
    ))
}

fn c3_pi() -> Check {
    let g = Grid::new([1.0, 0.6, 0.4], [5, 3, 2]).map_err(e)?;
    let t = build_demag_tensor(&g);
    let axis = Vec3::new(1.0, 2.0, 2.0).normalized().unwrap();
    let aniso = MaterialParams {
        aniso_axis: axis,
        aniso_strength: 0.8,
        enable_aniso: true,
        ..MaterialParams::default()
    };
    let demag = MaterialParams {
        enable_demag: true,
        ..MaterialParams::default()
    };
    let both = MaterialParams {
        enable_demag: true,
        ..aniso
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = random_field(g, &mut rng);
        let v = random_field(g, &mut rng);
        let scale = l2_norm(&u) * l2_norm(&v);
        for p in [&aniso, &demag, &both] {
            let a = inner_product(&pi_op(&u, p, Some(&t)).map_err(e)?, &v).map_err(e)?;
            let b = inner_product(&u, &pi_op(&v, p, Some(&t)).map_err(e)?).map_err(e)?;
            worst = worst.max((a - b).abs() / scale);
        }
    }
    let unit_aniso = MaterialParams {
        aniso_strength: 1.0,
        ..aniso
    };
    let c_aniso = estimate_pi_norm(&unit_aniso, None, &g).map_err(e)?;
    let g1 = Grid::new([1.0, 1.0, 1.0], [1, 1, 1]).map_err(e)?;
    let t1 = build_demag_tensor(&g1);
    let c_cell = estimate_pi_norm(&demag, Some(&t1), &g1).map_err(e)?;
    // Independent check of the anisotropy operator on the two eigenspaces.
    let m = VectorField::uniform(g, axis);
    let eig = anisotropy_op(&m, &unit_aniso).map_err(e)?.sub(&m.scale(2.0)).map_err(e)?.max_norm();
    Ok((
        worst <= 1e-10 && (c_aniso - 2.0).abs() <= 1e-6 && (c_cell - 1.0 / 3.0).abs() <= 1e-6 && eig < 1e-14,
        format!(
            "self-adjointness max rel {worst:.1e} (tol 1e-10); C_pi aniso {c_aniso:.9} (2); single-cell demag {c_cell:.9} (1/3)"
        ),
    ))
}

fn c4_gilbert() -> Check {
    let g = Grid::new([1.0, 0.8, 0.4], [4, 4, 2]).map_err(e)?;
    let t = build_demag_tensor(&g);
    let p = MaterialParams {
        ell_ex: 0.3,
        kappa: 0.1,
        alpha: 0.4,
        aniso_axis: Vec3::new(0.0, 0.6, 0.8),
        aniso_strength: 0.7,
        enable_aniso: true,
        enable_demag: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = random_unit(g, &mut rng);
        let f = VectorField::uniform(g, Vec3::new(rng.gen_range(-1.0..1.0), 0.3, rng.gen_range(-1.0..1.0)));
        let v = llg_rhs(m.field(), &f, &p, Some(&t)).map_err(e)?;
        let h = effective_field(m.field(), &f, &p, Some(&t)).map_err(e)?;
        let r = gilbert_residual(m.field(), &v, &f, &p, Some(&t)).map_err(e)?;
        worst = worst.max(r / (l2_norm(&h) + l2_norm(&v)));
    }
    Ok((worst <= 1e-10, format!("max residual / scale {worst:.1e} over 50 states (tol 1e-10)")))
}

/// Damped precession about `H e_z`, written out independently of the
/// library's closed form.
fn precession(theta0: f64, h: f64, alpha: f64, t: f64) -> Vec3 {
    let theta = 2.0 * ((theta0 / 2.0).tan() * (-alpha * h * t / (1.0 + alpha * alpha)).exp()).atan();
    let phi = h * t / (1.0 + alpha * alpha);
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn c5_macrospin() -> Check {
    let g = Grid::new([1.0, 1.0, 1.0], [1, 1, 1]).map_err(e)?;
    let (theta0, h, alpha, t_end) = (1.0f64, 1.0, 0.1, 5.0);
    let m0 = MagnetizationField::uniform(g, Vec3::new(theta0.sin(), 0.0, theta0.cos())).map_err(e)?;
    let p = MaterialParams {
        alpha,
        ..MaterialParams::default()
    };
    let f = AppliedField::Constant(Vec3::new(0.0, 0.0, h));
    let exact = precession(theta0, h, alpha, t_end);
    let mut ok = true;
    let mut detail = Vec::new();
    for scheme in [Scheme::ProjectedHeun, Scheme::ImplicitMidpoint] {
        let mut errs = Vec::new();
        for dt in [0.1, 0.05, 0.025] {
            let traj = simulate(&m0, &f, &p, &SolverConfig::new(dt, t_end, scheme), None).map_err(e)?;
            errs.push((traj.last().values()[0] - exact).norm());
        }
        let o = orders(&errs);
        ok &= o.iter().all(|q| (q - 2.0).abs() <= 0.2);
        detail.push(format!("{scheme} errors {} orders {}", fmt(&errs), fmt_orders(&o)));
    }
    Ok((ok, detail.join("; ")))
}

struct Relax {
    grid: Grid,
    params: MaterialParams,
    field: AppliedField,
    m0: MagnetizationField,
    tensor: DemagTensor,
}

fn relax_setup(cells: [usize; 3]) -> Result<Relax, String> {
    let cfg = config("relax.cfg")?;
    let grid = Grid::new(cfg.grid.extents(), cells).map_err(e)?;
    let m0 = cfg.initial.sample(&grid).map_err(e)?;
    Ok(Relax {
        grid,
        params: cfg.params,
        field: cfg.field,
        m0,
        tensor: build_demag_tensor(&grid),
    })
}

const RELAX_T: f64 = 0.5;

fn relax_run(r: &Relax, scheme: Scheme, dt: f64) -> Result<Trajectory<f64>, String> {
    simulate(&r.m0, &r.field, &r.params, &SolverConfig::new(dt, RELAX_T, scheme), Some(&r.tensor)).map_err(e)
}

fn e0(r: &Relax) -> Result<f64, String> {
    Ok(energy(&r.m0, &r.field.field(&r.grid, 0.0), &r.params, Some(&r.tensor)).map_err(e)?.helical_total)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn c6_energy_laws() -> Check {
    let r = relax_setup([8, 8, 2])?;
    let e0 = e0(&r)?;
    let mut law = Vec::new();
    let mut cons = Vec::new();
    for dt in [0.01, 0.005, 0.0025] {
        let traj = relax_run(&r, Scheme::ImplicitMidpoint, dt)?;
        law.push(max_abs(&energy_law_residual(&traj, &r.field, &r.params, Some(&r.tensor)).map_err(e)?));
        cons.push(max_of(&conservation_residual(&traj, &r.field, &r.params, Some(&r.tensor)).map_err(e)?));
    }
    let mut heun = Vec::new();
    for dt in [0.01, 0.005] {
        let traj = relax_run(&r, Scheme::ProjectedHeun, dt)?;
        heun.push(max_of(&energy_law_residual(&traj, &r.field, &r.params, Some(&r.tensor)).map_err(e)?));
    }
    let (ol, oc) = (orders(&law), orders(&cons));
    let tol = 1e-8 * e0.abs();
    let ok = ol.iter().chain(&oc).all(|q| (q - 2.0).abs() <= 0.3) && heun.iter().all(|v| *v <= tol);
    Ok((
        ok,
        format!(
            "midpoint |r| {} orders {}; conservation {} orders {}; Heun max r {} (tol 1e-8|E0| = {tol:.2e})",
            fmt(&law),
            fmt_orders(&ol),
            fmt(&cons),
            fmt_orders(&oc),
            fmt(&heun)
        ),
    ))
}

fn c7_weak_axioms() -> Check {
    let coarse = relax_setup([8, 8, 2])?;
    let fine = relax_setup([16, 16, 4])?;
    let e0 = e0(&coarse)?;
    let tol = 1e-8 * e0.abs();
    let drift = |t: &Trajectory<f64>| t.snapshots.iter().map(|m| m.max_unit_deviation()).fold(0.0, f64::max);

    let mid = relax_run(&coarse, Scheme::ImplicitMidpoint, 0.0025)?;
    let heun = relax_run(&coarse, Scheme::ProjectedHeun, 0.01)?;
    let (d_mid, d_heun) = (drift(&mid), drift(&heun));
    let mut ineq = Vec::new();
    for t in [&mid, &heun] {
        ineq.push(max_of(&energy_law_residual(t, &coarse.field, &coarse.params, Some(&coarse.tensor)).map_err(e)?));
    }

    let mut weak = Vec::new();
    for (r, dt) in [(&coarse, 0.01), (&fine, 0.005)] {
        let t = relax_run(r, Scheme::ImplicitMidpoint, dt)?;
        let tests = default_test_fields(&r.grid);
        weak.push(weak_form_residual(&t, &r.field, &r.params, Some(&r.tensor), &tests).map_err(e)?);
    }
    let ow = orders(&weak);
    let ok = d_mid <= 1e-12 && d_heun <= 4.0 * f64::EPSILON && ow.iter().all(|q| *q >= 1.0) && ineq.iter().all(|v| *v <= tol);
    Ok((
        ok,
        format!(
            "unit drift midpoint {d_mid:.1e} / projected {d_heun:.1e}; weak residual {} order {}; energy inequality max r {} (tol {tol:.2e})",
            fmt(&weak),
            fmt_orders(&ow),
            fmt(&ineq)
        ),
    ))
}

fn c8_strong_strong() -> Check {
    let cfg = config("strong_strong.cfg")?;
    let m0 = cfg.initial.sample(&cfg.grid).map_err(e)?;
    let tensor = cfg.params.enable_demag.then(|| build_demag_tensor(&cfg.grid));
    let solver = cfg.solver_with_stride();
    let sweep = strong_strong_sweep(&m0, &[1e-2, 1e-3, 1e-4], &cfg.field, &cfg.params, &solver, tensor.as_ref())
        .map_err(e)?;
    let zero = strong_strong_experiment(&m0, 0.0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(e)?;
    let slack_ok = sweep.reports.iter().chain([&zero]).all(|r| r.estimate_holds(1e-8));
    let min_rel = sweep
        .reports
        .iter()
        .map(|r| r.min_slack() / r.scale)
        .fold(f64::INFINITY, f64::min);
    let g = sweep.reports[0].gronwall;
    Ok((
        sweep.stable(0.2) && zero.max_w <= 1e-10 && slack_ok,
        format!(
            "T* {:.4} ({} samples <= T*/2), |w|/eps spread {:.1e} (tol 0.2); eps=0 max |w| {:.1e}; min slack/scale {min_rel:.1e}",
            g.t_star,
            sweep.times.len(),
            sweep.spread,
            zero.max_w
        ),
    ))
}

fn weak_strong_report(levels: usize) -> Result<helimag::lab::WeakStrongReport<f64>, String> {
    let cfg = config("weak_strong.cfg")?;
    let initial = |x| cfg.initial.value_at(x).unwrap();
    weak_strong_experiment(&cfg.grid, &initial, &cfg.field, &cfg.params, &cfg.solver_with_stride(), levels).map_err(e)
}

fn c9_weak_strong() -> Check {
    let rep = weak_strong_report(3)?;
    let w: Vec<f64> = rep.levels.iter().map(|l| l.w_final).collect();
    let cells: Vec<String> = rep
        .levels
        .iter()
        .map(|l| format!("{}x{}x{}", l.cells[0], l.cells[1], l.cells[2]))
        .collect();
    let gaps: Vec<f64> = rep.levels.iter().map(|l| l.gap.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    Ok((
        rep.decreasing_by(2.0),
        format!(
            "{}: |w(T)| {} factors {} (>= 2); min estimate gap {} (reported)",
            cells.join(" -> "),
            fmt(&w),
            fmt_orders(&rep.factors),
            fmt(&gaps)
        ),
    ))
}

fn c10_lemmas() -> Check {
    let g = Grid::new([1.0, 1.0, 1.0], [2, 1, 1]).map_err(e)?;
    let n = 1001;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let zero: Vec<VectorField> = times.iter().map(|_| VectorField::zeros(g)).collect();
    let z = poincare_check(&times, &zero).map_err(e)?;
    let zero_ok = z.lhs.iter().chain(&z.rhs).all(|v| *v == 0.0) && z.holds(0.0);
    let v = VectorField::uniform(g, Vec3::new(0.3, -0.4, 1.2));
    let lin: Vec<VectorField> = times.iter().map(|t| v.scale(*t)).collect();
    let l = poincare_check(&times, &lin).map_err(e)?;
    let ratio = l.lhs[n - 1] / l.rhs[n - 1];
    let lin_ok = l.holds(0.0) && (ratio - 1.0 / 3.0).abs() < 1e-6;

    let gz = gronwall_check(&times, &vec![0.0; n], 5.0, 1e-12).map_err(e)?;
    let exp: Vec<f64> = times.iter().map(|t| t.exp()).collect();
    let ge = gronwall_check(&times, &exp, 0.5, 1e-12).map_err(e)?;
    let step: Vec<f64> = times.iter().map(|t| if *t < 0.5 { 0.0 } else { 1.0 }).collect();
    let gs = gronwall_check(&times, &step, 100.0, 1e-12).map_err(e)?;
    let gronwall_ok = gz.hypothesis && gz.conclusion && !ge.hypothesis && !gs.hypothesis;

    let ws = weak_strong_report(2)?;
    let ws_ok = ws.levels.iter().all(|l| l.poincare.holds(1e-8));
    let cfg = config("strong_strong.cfg")?;
    let m0 = cfg.initial.sample(&cfg.grid).map_err(e)?;
    let tensor = cfg.params.enable_demag.then(|| build_demag_tensor(&cfg.grid));
    let solver = cfg.solver_with_stride();
    let a = simulate(&m0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(e)?;
    let b = simulate(&m0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(e)?;
    let pair_ok = poincare_check_pair(&a, &b).map_err(e)?.holds(0.0);
    let _ = strong_strong_experiment(&m0, 0.0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(e)?;
    Ok((
        zero_ok && lin_ok && gronwall_ok && ws_ok && pair_ok,
        format!(
            "Poincare w=0 {zero_ok}, w=tv ratio {ratio:.9} (1/3); Gronwall u=0 {}, e^t rejected {}, step rejected {}; experiment pairs {}",
            gz.hypothesis && gz.conclusion,
            !ge.hypothesis,
            !gs.hypothesis,
            ws_ok && pair_ok
        ),
    ))
}

fn c11_plumbing() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let mut notes = Vec::new();

    let cfg = config("relax.cfg")?;
    let again = parse_config(&format_config(&cfg)).map_err(e)?;
    let cfg_ok = again == cfg;
    notes.push(format!("config {cfg_ok}"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = random_unit(cfg.grid, &mut rng);
    let snap_ok = parse_snapshot(&format_snapshot(m.field())).map_err(e)? == *m.field();
    notes.push(format!("snapshot {snap_ok}"));

    let traj = simulate(&m, &cfg.field, &cfg.params, &SolverConfig::new(0.01, 0.05, Scheme::ProjectedHeun), Some(&build_demag_tensor(&cfg.grid)))
        .map_err(e)?;
    let recs = series_records(&traj, &cfg.field, &cfg.params, Some(&build_demag_tensor(&cfg.grid))).map_err(e)?;
    let csv_ok = parse_series(&format_series(&recs)).map_err(e)? == recs && recs.len() == traj.len();
    notes.push(format!("csv {csv_ok}"));

    let bin = env!("CARGO_BIN_EXE_helimag");
    let macrospin = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/macrospin.cfg");
    let out = dir.path().join("m");
    let code = |args: &[&str]| Command::new(bin).args(args).output().map(|o| o.status.code()).map_err(e);
    let success = code(&["run", macrospin.to_str().unwrap(), "--out", out.to_str().unwrap()])? == Some(0)
        && code(&["verify", macrospin.to_str().unwrap(), out.to_str().unwrap()])? == Some(0);
    fs::remove_file(out.join("snapshot_00007.txt")).map_err(e)?;
    let check_failure = code(&["verify", macrospin.to_str().unwrap(), out.to_str().unwrap()])? == Some(1);
    let usage = code(&["run"])? == Some(2) && code(&["run", macrospin.to_str().unwrap(), "--dt", "x"])? == Some(2);
    notes.push(format!("exit codes success {success}, check failure {check_failure}, usage {usage}"));
    Ok((cfg_ok && snap_ok && csv_ok && success && check_failure && usage, notes.join("; ")))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Check); 11] = [
        ("helicity identity", 5.0, c1_helicity),
        ("operator calculus", 5.0, c2_calculus),
        ("lower-order operator", 30.0, c3_pi),
        ("Gilbert/LL equivalence", 5.0, c4_gilbert),
        ("macrospin convergence", 10.0, c5_macrospin),
        ("energy laws", 60.0, c6_energy_laws),
        ("weak-solution axioms", 60.0, c7_weak_axioms),
        ("strong-strong contraction", 120.0, c8_strong_strong),
        ("weak-strong agreement", 300.0, c9_weak_strong),
        ("Poincare and Gronwall harnesses", 5.0, c10_lemmas),
        ("plumbing", 5.0, c11_plumbing),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok((ok, d)) => (ok && secs <= *limit, d),
            Err(err) => (false, format!("error: {err}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {detail} [{secs:.2} s, limit {limit} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
