//! Command-line driver.
//!
//! Exit codes: `0` success, `1` check failure or runtime failure, `2` usage
//! error (bad arguments, unreadable or invalid configuration, bad
//! `HELIMAG_THREADS`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::demag::{build_demag_tensor, read_demag_cache, write_demag_cache, DemagTensor};
use crate::dynamics::{simulate, Scheme, Trajectory};
use crate::energy::{default_test_fields, dissipation, energy_law_residual, energy_series, weak_form_residual};
use crate::error::Error;
use crate::grid::{Grid, MagnetizationField};
use crate::io::config::{load_config, InitialCondition, RunConfig};
use crate::io::series::{series_records, write_series};
use crate::io::snapshot::{parse_snapshot, write_snapshot};
use crate::lab::{strong_strong_experiment, strong_strong_sweep, weak_strong_experiment, StrongStrongReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// `max ‖w‖` allowed for identical initial data.
pub const ZERO_EPS_TOL: f64 = 1e-10;
/// Spread allowed in `‖w‖/ε` across the sweep.
pub const SWEEP_TOL: f64 = 0.2;
/// Relative slack allowed in the integrated contraction estimate.
pub const ESTIMATE_TOL: f64 = 1e-8;
/// Reduction of `‖w(T)‖` required per weak-strong refinement.
pub const WEAK_STRONG_FACTOR: f64 = 2.0;

#[derive(Parser, Debug)]
#[command(name = "helimag", version, about = "Helical micromagnetics: simulate, verify, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a configuration and write snapshots plus series.csv.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a trajectory directory against the weak-solution axioms.
    Verify {
        config: PathBuf,
        dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Uniqueness experiments.
    Lab {
        #[command(subcommand)]
        experiment: Experiment,
    },
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Two midpoint runs from nearby initial data.
    StrongStrong {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Projected Heun against implicit midpoint under joint refinement.
    WeakStrong {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Cell counts, e.g. 8x8x2 or 8,8,2.
    #[arg(long, value_parser = parse_cells)]
    cells: Option<[usize; 3]>,
    /// implicit_midpoint or projected_heun.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Perturbation sizes, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_cells(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(|c: char| c == 'x' || c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<usize>().map_err(|_| format!("bad cell count '{p}'")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    nums.try_into().map_err(|_| "expected three cell counts".to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Check(String),
    Runtime(String),
}

type Outcome = std::result::Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Run { config, overrides } => run(&config, &overrides),
        Command::Verify { config, dir, overrides } => verify(&config, &dir, &overrides),
        Command::Lab { experiment } => match experiment {
            Experiment::StrongStrong { config, overrides } => lab_strong_strong(&config, &overrides),
            Experiment::WeakStrong { config, overrides } => lab_weak_strong(&config, &overrides),
        },
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            EXIT_CHECK
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: simulation failed: {msg}");
            EXIT_CHECK
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("HELIMAG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("HELIMAG_THREADS must be a positive integer, found '{v}'")))?;
    // A pool may already exist when called repeatedly in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(path: &Path, ov: &Overrides) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = load_config(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(dt) = ov.dt {
        cfg.solver.dt = dt;
    }
    if let Some(cells) = ov.cells {
        cfg.grid = Grid::new(cfg.grid.extents(), cells).map_err(usage)?;
    }
    if let Some(s) = ov.scheme {
        cfg.solver.scheme = s;
    }
    if let Some(eps) = &ov.eps {
        if eps.iter().any(|e| !(*e >= 0.0)) {
            return Err(usage("--eps values must be >= 0"));
        }
        cfg.lab.eps = eps.clone();
    }
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn initial_state(cfg: &RunConfig) -> std::result::Result<MagnetizationField<f64>, Failure> {
    cfg.initial
        .sample(&cfg.grid)
        .map_err(|e| usage(format!("initial condition: {e}")))
}

const DEMAG_CACHE: &str = "demag.cache";

fn demag_tensor(cfg: &RunConfig, cache_dir: Option<&Path>) -> std::result::Result<Option<DemagTensor<f64>>, Failure> {
    if !cfg.params.enable_demag {
        return Ok(None);
    }
    if let Some(dir) = cache_dir {
        if let Ok(Some(t)) = read_demag_cache(&dir.join(DEMAG_CACHE), &cfg.grid) {
            return Ok(Some(t));
        }
    }
    let t = build_demag_tensor(&cfg.grid);
    if let Some(dir) = cache_dir {
        write_demag_cache(&t, &dir.join(DEMAG_CACHE)).map_err(runtime)?;
    }
    Ok(Some(t))
}

fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}.txt")
}

fn run(config: &Path, ov: &Overrides) -> Outcome {
    let cfg = load(config, ov)?;
    let m0 = initial_state(&cfg)?;
    let out = &cfg.output.dir;
    ensure_dir(out)?;
    let tensor = demag_tensor(&cfg, Some(out))?;
    let solver = cfg.solver_with_stride();
    let traj = simulate(&m0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(runtime)?;
    for (k, m) in traj.snapshots.iter().enumerate() {
        write_snapshot(m, &out.join(snapshot_name(k))).map_err(runtime)?;
    }
    let records = series_records(&traj, &cfg.field, &cfg.params, tensor.as_ref()).map_err(runtime)?;
    write_series(&records, &out.join("series.csv")).map_err(runtime)?;
    let first = records.first().unwrap();
    let last = records.last().unwrap();
    let max_iter = traj.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0);
    println!("scheme          {}", solver.scheme);
    println!("grid            {:?} cells", cfg.grid.cells());
    println!("steps           {} (dt = {:e})", solver.steps(), solver.dt);
    println!("snapshots       {}", traj.len());
    println!("max iterations  {max_iter}");
    println!("E_h(0)          {:e}", first.e_helical);
    println!("E_h(T)          {:e}", last.e_helical);
    println!("residual(T)     {:e}", last.residual);
    println!("wrote           {}", out.display());
    Ok(())
}

struct Report {
    lines: String,
    failed: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report {
            lines: String::new(),
            failed: Vec::new(),
        }
    }

    fn check(&mut self, axiom: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        let _ = writeln!(self.lines, "{tag} [{axiom}] {detail}");
        if !ok {
            self.failed.push(axiom.to_string());
        }
    }

    fn failure(&self) -> Failure {
        Failure::Check(format!("verification failed: [{}]", self.failed.join("], [")))
    }
}

const REGULARITY: &str = "axiom (i) regularity";
const SPHERE: &str = "axiom (i) sphere constraint";
const INITIAL: &str = "axiom (ii) initial data";
const WEAK_FORM: &str = "axiom (iii) weak form";
const ENERGY: &str = "axiom (iv) energy inequality";

fn load_trajectory(cfg: &RunConfig, dir: &Path) -> std::result::Result<(Trajectory<f64>, f64), String> {
    let solver = cfg.solver_with_stride();
    let expected = solver.steps() / solver.stride + 1;
    let mut snapshots = Vec::with_capacity(expected);
    let mut times = Vec::with_capacity(expected);
    let mut deviation: f64 = 0.0;
    for k in 0..expected {
        let path = dir.join(snapshot_name(k));
        let text = fs::read_to_string(&path).map_err(|_| {
            format!(
                "trajectory truncated: {} missing ({k} of {expected} snapshots present)",
                path.display()
            )
        })?;
        let field = parse_snapshot(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if field.grid() != &cfg.grid {
            return Err(format!(
                "{}: grid {:?} does not match configured {:?}",
                path.display(),
                field.grid().cells(),
                cfg.grid.cells()
            ));
        }
        if let Some(c) = field.first_non_finite() {
            return Err(format!("{}: non-finite value at cell {c}", path.display()));
        }
        deviation = deviation.max(field.max_unit_deviation());
        snapshots.push(MagnetizationField::new_unchecked(field));
        times.push((k * solver.stride) as f64 * solver.dt);
    }
    let traj = Trajectory {
        params: cfg.params,
        times,
        snapshots,
        diagnostics: Vec::new(),
    };
    Ok((traj, deviation))
}

fn verify(config: &Path, dir: &Path, ov: &Overrides) -> Outcome {
    let cfg = load(config, ov)?;
    let m0 = initial_state(&cfg)?;
    let mut report = Report::new();
    let (traj, deviation) = match load_trajectory(&cfg, dir) {
        Ok(t) => t,
        Err(msg) => {
            report.check(REGULARITY, false, msg);
            print!("{}", report.lines);
            return Err(report.failure());
        }
    };
    report.check(
        REGULARITY,
        traj.len() >= 3,
        format!("{} snapshots on {:?} cells", traj.len(), cfg.grid.cells()),
    );
    let on_sphere = deviation <= cfg.verify.norm_tol;
    report.check(
        SPHERE,
        on_sphere,
        format!("max ||m| - 1| = {deviation:e} (tol {:e})", cfg.verify.norm_tol),
    );
    let start = traj.snapshots[0].field().sub(m0.field()).map_err(runtime)?.max_norm();
    report.check(INITIAL, start <= 1e-12, format!("max |m(0) - m0| = {start:e}"));

    if !on_sphere {
        let _ = writeln!(report.lines, "SKIP [{WEAK_FORM}] [{ENERGY}] need the sphere constraint");
    } else if traj.len() >= 3 {
        let tensor = demag_tensor(&cfg, Some(dir).filter(|d| d.join(DEMAG_CACHE).is_file()))?;
        let tensor = tensor.as_ref();
        let tests = default_test_fields(&cfg.grid);
        let weak = weak_form_residual(&traj, &cfg.field, &cfg.params, tensor, &tests).map_err(runtime)?;
        report.check(
            WEAK_FORM,
            weak <= cfg.verify.weak_tol,
            format!("residual {weak:e} (tol {:e})", cfg.verify.weak_tol),
        );
        let r = energy_law_residual(&traj, &cfg.field, &cfg.params, tensor).map_err(runtime)?;
        let e = energy_series(&traj, &cfg.field, &cfg.params, tensor).map_err(runtime)?;
        let d = dissipation(&traj, &cfg.field).map_err(runtime)?;
        let scale = d
            .total
            .iter()
            .fold(e[0].helical_total.abs(), |a, b| a.max(b.abs()))
            .max(f64::MIN_POSITIVE);
        let worst = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.check(
            ENERGY,
            worst <= cfg.verify.energy_tol * scale,
            format!(
                "max residual {worst:e} (tol {:e} x scale {scale:e})",
                cfg.verify.energy_tol
            ),
        );
    }
    print!("{}", report.lines);
    if report.failed.is_empty() {
        Ok(())
    } else {
        Err(report.failure())
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn strong_strong_csv(reports: &[&StrongStrongReport<f64>]) -> String {
    let mut s = String::from("t");
    for r in reports {
        let _ = write!(s, ",w_eps={:e}", r.eps);
    }
    s.push('\n');
    if let Some(first) = reports.first() {
        for (k, t) in first.diagnostics.times.iter().enumerate() {
            let _ = write!(s, "{t}");
            for r in reports {
                let _ = write!(s, ",{}", r.diagnostics.w_norm[k]);
            }
            s.push('\n');
        }
    }
    s
}

fn lab_strong_strong(config: &Path, ov: &Overrides) -> Outcome {
    let cfg = load(config, ov)?;
    let m0 = initial_state(&cfg)?;
    let out = &cfg.output.dir;
    ensure_dir(out)?;
    let tensor = demag_tensor(&cfg, Some(out))?;
    let solver = cfg.solver_with_stride();
    let (zeros, positive): (Vec<f64>, Vec<f64>) = cfg.lab.eps.iter().partition(|e| **e == 0.0);
    let mut failures = Vec::new();
    let mut zero_reports = Vec::new();
    for _ in &zeros {
        let r = strong_strong_experiment(&m0, 0.0, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(runtime)?;
        let ok = r.max_w <= ZERO_EPS_TOL;
        println!(
            "{} eps = 0: max |w| = {:e} (tol {ZERO_EPS_TOL:e})",
            if ok { "PASS" } else { "FAIL" },
            r.max_w
        );
        if !ok {
            failures.push(format!("FAIL [strong-strong determinism] max |w| = {:e}", r.max_w));
        }
        zero_reports.push(r);
    }
    let sweep = if positive.is_empty() {
        None
    } else {
        Some(strong_strong_sweep(&m0, &positive, &cfg.field, &cfg.params, &solver, tensor.as_ref()).map_err(runtime)?)
    };
    let gronwall = sweep
        .as_ref()
        .map(|s| s.reports[0].gronwall)
        .or_else(|| zero_reports.first().map(|r| r.gronwall));
    if let Some(g) = gronwall {
        println!("C_pi = {:e}  C_psi = {:e}  delta = {:e}", g.c_pi, g.c_psi, g.delta);
        println!("C_left = {:e}  C_right = {:e}  T* = {:e}", g.c_left, g.c_right, g.t_star);
    }
    if let Some(s) = &sweep {
        for r in &s.reports {
            let ok = r.estimate_holds(ESTIMATE_TOL);
            println!(
                "{} eps = {:e}: max |w| = {:e}, min slack = {:e} (scale {:e})",
                if ok { "PASS" } else { "FAIL" },
                r.eps,
                r.max_w,
                r.min_slack(),
                r.scale
            );
            if !ok {
                failures.push(format!("FAIL [strong-strong estimate] eps = {:e}: min slack {:e}", r.eps, r.min_slack()));
            }
        }
        if s.reports.len() >= 2 {
            let ok = s.stable(SWEEP_TOL);
            println!(
                "{} |w|/eps spread = {:e} over {} samples with t <= T*/2 (tol {SWEEP_TOL})",
                if ok { "PASS" } else { "FAIL" },
                s.spread,
                s.times.len()
            );
            if !ok {
                failures.push(format!("FAIL [strong-strong linearity] spread {:e} over {} samples", s.spread, s.times.len()));
            }
        }
    }
    let all: Vec<&StrongStrongReport<f64>> = zero_reports
        .iter()
        .chain(sweep.iter().flat_map(|s| s.reports.iter()))
        .collect();
    write_text(&out.join("strong_strong.csv"), &strong_strong_csv(&all))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("\n")))
    }
}

fn lab_weak_strong(config: &Path, ov: &Overrides) -> Outcome {
    let cfg = load(config, ov)?;
    if matches!(cfg.initial, InitialCondition::File(_)) {
        return Err(usage("weak-strong needs a closed-form initial condition (not 'file')"));
    }
    if cfg.lab.levels < 2 {
        return Err(usage("weak-strong needs [lab] levels >= 2"));
    }
    let out = &cfg.output.dir;
    ensure_dir(out)?;
    let initial = |x| cfg.initial.value_at(x).unwrap();
    let report = weak_strong_experiment(
        &cfg.grid,
        &initial,
        &cfg.field,
        &cfg.params,
        &cfg.solver_with_stride(),
        cfg.lab.levels,
    )
    .map_err(runtime)?;
    let mut failures = Vec::new();
    let mut csv = String::from("level,nx,ny,nz,dt,w_final,factor,order,min_gap,poincare\n");
    for (k, level) in report.levels.iter().enumerate() {
        let factor = if k == 0 { f64::NAN } else { report.factors[k - 1] };
        let order = if k == 0 { f64::NAN } else { report.orders[k - 1] };
        let min_gap = level.gap.iter().copied().fold(f64::INFINITY, f64::min);
        let poincare = level.poincare.holds(ESTIMATE_TOL);
        let [nx, ny, nz] = level.cells;
        let shown = if k == 0 { "-".to_string() } else { format!("{factor:.3}") };
        println!(
            "level {k}: {nx}x{ny}x{nz} dt = {:e}  |w(T)| = {:e}  factor = {shown}  min gap = {min_gap:e}  poincare {}",
            level.dt,
            level.w_final,
            if poincare { "ok" } else { "violated" }
        );
        let _ = writeln!(
            csv,
            "{k},{nx},{ny},{nz},{},{},{factor},{order},{min_gap},{poincare}",
            level.dt, level.w_final
        );
        if !poincare {
            failures.push(format!("FAIL [poincare] level {k}"));
        }
    }
    let ok = report.decreasing_by(WEAK_STRONG_FACTOR);
    println!(
        "{} |w(T)| decreases by >= {WEAK_STRONG_FACTOR} per refinement",
        if ok { "PASS" } else { "FAIL" }
    );
    if !ok {
        failures.push(format!("FAIL [weak-strong agreement] factors {:?}", report.factors));
    }
    write_text(&out.join("weak_strong.csv"), &csv)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("\n")))
    }
}
