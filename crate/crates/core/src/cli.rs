//! The `pws` command line: simulations, ensembles, fast-system analysis and
//! bifurcation scans, written as CSV/JSON with a manifest per run.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::ensemble::{ensemble_average, run_ensemble, ExitRule, ExitSpec};
use crate::error::PwsError;
use crate::filippov::{bilinear_jacobian, bilinear_roots};
use crate::integrate::{
    euler_fixed, euler_random, rk_adaptive, stiff_adaptive, FnField, IntegratorConfig, NaiveField, RegularizedField,
    Trajectory,
};
use crate::io::{fmt_num, write_trajectory_csv, RunManifest};
use crate::model::Preset;
use crate::regularization::{
    boundary_equilibria, fast_equilibrium, fast_field, fast_jacobian, scan_bifurcation, FastPoint, Interpolant,
    RegularizationParams,
};

#[derive(Debug, Parser)]
#[command(name = "pws", version, about = "Piecewise-smooth systems near a codimension-2 discontinuity manifold")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Seeded random-Euler ensemble with exit statistics.
    Ensemble(EnsembleArgs),
    /// Equilibrium, stability and phase portrait of the fast system at one slow point.
    Fastslow(FastSlowArgs),
    /// Continue the fast equilibrium along a slow path and report bifurcations.
    Bifurcate(BifurcateArgs),
    /// List the presets.
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    RandomEuler,
    FixedEuler,
    RegularizedExplicit,
    RegularizedStiff,
    UnregularizedNaive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpolantArg {
    C1,
    C0,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "random-euler")]
    pub method: Method,
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// End time; defaults to the preset's ensemble horizon.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Initial state, comma separated; defaults to the preset's initial condition.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ic: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_alpha: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_beta: f64,
    #[arg(long, value_enum, default_value = "c1")]
    pub interpolant: InterpolantArg,
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub atol: f64,
    /// Use the Rosenbrock solver for the unregularized method.
    #[arg(long)]
    pub stiff: bool,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Base point whose slow components every member shares.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Option<Vec<f64>>,
    /// Tangential preset: starting x3²+x4².
    #[arg(long, default_value_t = 1.7)]
    pub rho: f64,
    /// Tangential preset: polar angle of (x3, x4) in radians.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2, allow_hyphen_values = true)]
    pub angle: f64,
    /// Consecutive increases required by the spiral rule.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Stop a member once the exit is settled and the monitor passes this many τ.
    #[arg(long, default_value_t = 1000.0)]
    pub stop_factor: f64,
    /// Integrate every member to the horizon.
    #[arg(long)]
    pub run_to_horizon: bool,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub avg: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FastSlowArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    /// Slow point: x3 for three-dimensional presets, x3,x4 (or the preset's
    /// radius-squared) for four-dimensional ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<f64>,
    /// ε_β / ε_α.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, requires = "eps_beta")]
    pub eps_alpha: Option<f64>,
    #[arg(long, requires = "eps_alpha")]
    pub eps_beta: Option<f64>,
    /// Analyse the dummy (unscaled bilinear) system instead.
    #[arg(long)]
    pub dummy: bool,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Phase-portrait grid as CSV of (alpha, beta, dalpha, dbeta).
    #[arg(long)]
    pub portrait: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Orbit of the fast system as CSV of (s, alpha, beta).
    #[arg(long)]
    pub orbit: Option<PathBuf>,
    /// Orbit start; defaults to the equilibrium shifted by 0.01 in alpha, or the centre of the square.
    #[arg(long, value_delimiter = ',')]
    pub orbit_start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50.0)]
    pub orbit_time: f64,
    /// Integrate the orbit forward in time (backward by default).
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BifurcateArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, requires = "eps_beta")]
    pub eps_alpha: Option<f64>,
    #[arg(long, requires = "eps_alpha")]
    pub eps_beta: Option<f64>,
    #[arg(long)]
    pub dummy: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<PwsError> for CliError {
    fn from(e: PwsError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse::<Preset>().map_err(|e| e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("{e}");
        return e.exit_code();
    }
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("PWS_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("PWS_THREADS must be a positive integer, got {value:?}")))?;
    // a pool configured earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: Command, argv: Vec<String>) -> CliResult<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, argv),
        Command::Ensemble(a) => cmd_ensemble(&a, argv),
        Command::Fastslow(a) => cmd_fastslow(&a, argv),
        Command::Bifurcate(a) => cmd_bifurcate(&a, argv),
        Command::List => {
            print!("{}", list_text());
            Ok(())
        }
    }
}

pub fn list_text() -> String {
    let mut s = format!("{:<14} {:>3}  {:<22} {:<30} {}\n", "preset", "dim", "exit locus", "validity domain", "initial condition");
    for p in Preset::ALL {
        let ic: Vec<String> = p.default_initial_condition().iter().map(|v| format!("{v}")).collect();
        s.push_str(&format!(
            "{:<14} {:>3}  {:<22} {:<30} ({})\n",
            p.name(),
            p.dim(),
            p.exit_locus(),
            p.validity_domain(),
            ic.join(", ")
        ));
    }
    s
}

fn manifest_path(out: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_csv(path: &Path, traj: &Trajectory) -> CliResult<()> {
    write_trajectory_csv(traj, create(path)?)?;
    Ok(())
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn check_dim(name: &str, v: &[f64], dim: usize) -> CliResult<()> {
    if v.len() != dim {
        return Err(CliError::Usage(format!("--{name} needs {dim} values, got {}", v.len())));
    }
    Ok(())
}

/// Point on the manifold for the given slow values. Four-dimensional presets
/// accept either `(x3, x4)` or their radius-squared slow coordinate.
pub fn slow_state(preset: Preset, y: &[f64]) -> CliResult<Vec<f64>> {
    match (preset.dim(), y) {
        (3, [x3]) => Ok(vec![0.0, 0.0, *x3]),
        (4, [a, b]) => Ok(vec![0.0, 0.0, *a, *b]),
        (4, [r]) if *r >= 0.0 => Ok(match preset {
            Preset::Ambiguous => vec![0.0, 0.0, 3.0, 3.0 - r.sqrt()],
            _ => vec![0.0, 0.0, 0.0, r.sqrt()],
        }),
        _ => Err(CliError::Usage(format!(
            "--y for preset {} takes {} value(s), got {:?}",
            preset.name(),
            if preset.dim() == 3 { "1" } else { "1 or 2" },
            y
        ))),
    }
}

fn regularization(
    eta: f64,
    eps: (Option<f64>, Option<f64>),
    dummy: bool,
) -> CliResult<RegularizationParams> {
    let interp = if dummy { Interpolant::C0Linear } else { Interpolant::C1Cubic };
    let params = match eps {
        (Some(a), Some(b)) => RegularizationParams::new(a, b, interp),
        _ => {
            positive("eta", eta)?;
            RegularizationParams::with_eta(eta, interp)
        }
    };
    params.map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_simulate(a: &SimulateArgs, argv: Vec<String>) -> CliResult<()> {
    let preset = a.preset;
    let sys = preset.system();
    let x0 = a.ic.clone().unwrap_or_else(|| preset.default_initial_condition());
    check_dim("ic", &x0, sys.dim())?;
    let horizon = a.t_end.unwrap_or_else(|| ExitSpec::default_horizon(preset));
    positive("t-end", horizon)?;
    let mut cfg = match a.method {
        Method::RandomEuler | Method::FixedEuler => {
            positive("tau", a.tau)?;
            IntegratorConfig::euler(a.tau, horizon, a.seed)
        }
        _ => {
            positive("rtol", a.rtol)?;
            positive("atol", a.atol)?;
            IntegratorConfig::adaptive(a.rtol, a.atol, horizon)
        }
    };
    if let Some(m) = a.max_steps {
        cfg.max_steps = m;
    }
    let interp = match a.interpolant {
        InterpolantArg::C1 => Interpolant::C1Cubic,
        InterpolantArg::C0 => Interpolant::C0Linear,
    };
    let start = Instant::now();
    let traj = match a.method {
        Method::RandomEuler => euler_random(&sys, &x0, &cfg)?,
        Method::FixedEuler => euler_fixed(&sys, &x0, &cfg)?,
        Method::RegularizedExplicit | Method::RegularizedStiff => {
            let params =
                RegularizationParams::new(a.eps_alpha, a.eps_beta, interp).map_err(|e| CliError::Usage(e.to_string()))?;
            let field = RegularizedField::new(&sys, params)?;
            if a.method == Method::RegularizedStiff {
                stiff_adaptive(&field, &x0, &cfg)?
            } else {
                rk_adaptive(&field, &x0, &cfg)?
            }
        }
        Method::UnregularizedNaive => {
            let field = NaiveField::new(&sys);
            if a.stiff {
                stiff_adaptive(&field, &x0, &cfg)?
            } else {
                rk_adaptive(&field, &x0, &cfg)?
            }
        }
    };
    write_csv(&a.out, &traj)?;
    let mpath = manifest_path(&a.out, &a.manifest);
    let mut m = RunManifest::new("simulate", preset.name(), argv);
    m.param("method", a.method.to_possible_value().map(|v| v.get_name().to_string()))
        .param("ic", &x0)
        .param("t_end", horizon)
        .param("steps", traj.len().saturating_sub(1))
        .param("truncated", traj.truncated);
    match a.method {
        Method::RandomEuler | Method::FixedEuler => {
            m.param("tau", a.tau);
            m.seed = Some(a.seed);
        }
        _ => {
            m.param("rtol", a.rtol).param("atol", a.atol);
        }
    }
    if matches!(a.method, Method::RegularizedExplicit | Method::RegularizedStiff) {
        m.param("eps_alpha", a.eps_alpha).param("eps_beta", a.eps_beta).param("interpolant", interp);
    }
    if a.method == Method::UnregularizedNaive {
        m.param("stiff", a.stiff);
    }
    m.outputs.push(a.out.display().to_string());
    write_json(&mpath, &m)?;
    println!(
        "{} steps to t = {} in {:.2}s{}; wrote {}",
        traj.len().saturating_sub(1),
        traj.times.last().copied().unwrap_or(0.0),
        start.elapsed().as_secs_f64(),
        if traj.truncated { " (truncated at max steps)" } else { "" },
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ExitRecord {
    member: usize,
    index: usize,
    time: f64,
    state: Vec<f64>,
    slow_coordinate: f64,
    mode: crate::ensemble::ExitMode,
}

#[derive(Serialize)]
struct StatsRecord {
    schema: u32,
    preset: String,
    n: usize,
    tau: f64,
    seed: u64,
    base_point: Vec<f64>,
    horizon: f64,
    mean: Option<f64>,
    std: Option<f64>,
    non_exited: usize,
    exits: Vec<ExitRecord>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn cmd_ensemble(a: &EnsembleArgs, argv: Vec<String>) -> CliResult<()> {
    let preset = a.preset;
    let sys = preset.system();
    positive("tau", a.tau)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let base = match (&a.base, preset) {
        (Some(b), _) => b.clone(),
        (None, Preset::Tangential) => {
            positive("rho", a.rho)?;
            let r = a.rho.sqrt();
            vec![0.0, 0.0, r * a.angle.cos(), r * a.angle.sin()]
        }
        (None, _) => {
            let mut b = preset.default_initial_condition();
            b[0] = 0.0;
            b[1] = 0.0;
            b
        }
    };
    check_dim("base", &base, sys.dim())?;
    let horizon = a.t_end.unwrap_or_else(|| ExitSpec::default_horizon(preset));
    positive("t-end", horizon)?;
    let cfg = IntegratorConfig::euler(a.tau, horizon, a.seed);
    let mut spec = ExitSpec::for_preset(preset);
    if let ExitRule::Spiral { m_consecutive } = &mut spec.rule {
        *m_consecutive = a.m;
    }
    spec.stop_factor = (!a.run_to_horizon).then_some(a.stop_factor);
    if let Some(f) = spec.stop_factor {
        positive("stop-factor", f)?;
    }

    let start = Instant::now();
    let stats = run_ensemble(&sys, &base, a.n, &cfg, &spec)?;
    let record = StatsRecord {
        schema: crate::io::SCHEMA_VERSION,
        preset: preset.name().into(),
        n: stats.n,
        tau: stats.tau,
        seed: stats.seed,
        base_point: base.clone(),
        horizon,
        mean: finite(stats.mean),
        std: finite(stats.std),
        non_exited: stats.non_exited,
        exits: stats
            .exits
            .iter()
            .zip(&stats.exited_members)
            .map(|(e, &member)| ExitRecord {
                member,
                index: e.exit_index,
                time: e.exit_time,
                state: e.exit_state.clone(),
                slow_coordinate: e.slow_coordinate,
                mode: e.mode,
            })
            .collect(),
    };
    write_json(&a.stats, &record)?;
    let mut m = RunManifest::new("ensemble", preset.name(), argv);
    m.seed = Some(a.seed);
    m.param("n", a.n).param("tau", a.tau).param("base_point", &base).param("t_end", horizon).param("exit_spec", spec);
    m.outputs.push(a.stats.display().to_string());
    if let Some(path) = &a.avg {
        let avg = ensemble_average(&sys, &base, a.n, &cfg)?;
        write_csv(path, &avg)?;
        m.outputs.push(path.display().to_string());
    }
    write_json(&manifest_path(&a.stats, &a.manifest), &m)?;
    println!(
        "{} members, {} exited: mean {} std {} ({:.2}s)",
        stats.n,
        stats.exits.len(),
        fmt_num(stats.mean),
        fmt_num(stats.std),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Serialize)]
struct RootRecord {
    alpha: f64,
    beta: f64,
    /// Determinant of the bilinear Jacobian; zero at a double root.
    determinant: f64,
}

fn cmd_fastslow(a: &FastSlowArgs, argv: Vec<String>) -> CliResult<()> {
    let preset = a.preset;
    let sys = preset.system();
    let x = slow_state(preset, &a.y)?;
    let params = regularization(a.eta, (a.eps_alpha, a.eps_beta), a.dummy)?;
    let w = sys.projections(&x)?;
    let roots: Vec<RootRecord> = bilinear_roots(&w)
        .into_iter()
        .map(|(alpha, beta)| {
            let j = bilinear_jacobian(&w, alpha, beta);
            RootRecord { alpha, beta, determinant: j[0][0] * j[1][1] - j[0][1] * j[1][0] }
        })
        .collect();
    let (stability, note) = match fast_equilibrium(&w).and_then(|p| fast_jacobian(&w, p, &params)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let boundary: Vec<_> = boundary_equilibria(&w)
        .into_iter()
        .map(|(p, label)| json!({"alpha": p.alpha, "beta": p.beta, "label": label}))
        .collect();
    let report = json!({
        "schema": crate::io::SCHEMA_VERSION,
        "preset": preset.name(),
        "slow_point": x,
        "system": if a.dummy { "dummy" } else { "fast" },
        "eps_alpha": params.eps_alpha,
        "eps_beta": params.eps_beta,
        "eta": params.eta(),
        "projections": w,
        "roots": roots,
        "equilibrium": stability.as_ref().map(|s| s.equilibrium),
        "jacobian": stability.as_ref().map(|s| s.jacobian),
        "eigenvalues": stability.as_ref().map(|s| s.eigenvalues.map(|z| [z.re, z.im])),
        "classification": stability.as_ref().map(|s| s.classification),
        "note": note,
        "boundary_equilibria": boundary,
    });

    let mut m = RunManifest::new("fastslow", preset.name(), argv);
    m.param("y", &a.y).param("regularization", params).param("dummy", a.dummy);
    match &a.out {
        Some(p) => {
            write_json(p, &report)?;
            m.outputs.push(p.display().to_string());
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?),
    }
    let field = |p: FastPoint| fast_field(&w, p, &params);
    if let Some(path) = &a.portrait {
        if a.grid < 2 {
            return Err(CliError::Usage("--grid must be at least 2".into()));
        }
        let mut out = create(path)?;
        let io = |e: std::io::Error| CliError::Runtime(e.to_string());
        writeln!(out, "alpha,beta,dalpha,dbeta").map_err(io)?;
        for i in 0..a.grid {
            for j in 0..a.grid {
                let p = FastPoint::new(i as f64 / (a.grid - 1) as f64, j as f64 / (a.grid - 1) as f64);
                let (da, db) = field(p);
                writeln!(out, "{},{},{},{}", fmt_num(p.alpha), fmt_num(p.beta), fmt_num(da), fmt_num(db)).map_err(io)?;
            }
        }
        out.flush().map_err(io)?;
        m.param("grid", a.grid);
        m.outputs.push(path.display().to_string());
    }
    if let Some(path) = &a.orbit {
        let start = match (&a.orbit_start, &stability) {
            (Some(s), _) => {
                check_dim("orbit-start", s, 2)?;
                s.clone()
            }
            (None, Some(r)) => vec![(r.equilibrium.alpha + 0.01).min(1.0), r.equilibrium.beta],
            (None, None) => vec![0.5, 0.5],
        };
        positive("orbit-time", a.orbit_time)?;
        let sign = if a.forward { 1.0 } else { -1.0 };
        let f = FnField::new(2, |_t, y: &[f64], out: &mut [f64]| {
            let (da, db) = field(FastPoint::new(y[0], y[1]));
            out[0] = sign * da;
            out[1] = sign * db;
        });
        let traj = rk_adaptive(&f, &start, &IntegratorConfig::adaptive(1e-9, 1e-12, a.orbit_time))?;
        let mut out = create(path)?;
        let io = |e: std::io::Error| CliError::Runtime(e.to_string());
        writeln!(out, "s,alpha,beta").map_err(io)?;
        for k in 0..traj.len() {
            let y = traj.state(k);
            writeln!(out, "{},{},{}", fmt_num(sign * traj.times[k]), fmt_num(y[0]), fmt_num(y[1])).map_err(io)?;
        }
        out.flush().map_err(io)?;
        m.param("orbit_start", &start).param("orbit_time", a.orbit_time).param("forward", a.forward);
        m.outputs.push(path.display().to_string());
    }
    if let Some(first) = m.outputs.first().cloned() {
        write_json(&manifest_path(Path::new(&first), &a.manifest), &m)?;
    }
    Ok(())
}

fn cmd_bifurcate(a: &BifurcateArgs, argv: Vec<String>) -> CliResult<()> {
    let preset = a.preset;
    let sys = preset.system();
    let params = regularization(a.eta, (a.eps_alpha, a.eps_beta), a.dummy)?;
    positive("tol", a.tol)?;
    if preset.dim() == 4 && a.y_min.min(a.y_max) < 0.0 {
        return Err(CliError::Usage("radius-squared range must be non-negative".into()));
    }
    let path = |s: f64| slow_state(preset, &[s]).expect("validated slow range");
    let reports = scan_bifurcation(&sys, &params, path, (a.y_min, a.y_max), a.tol)?;
    let doc = json!({
        "schema": crate::io::SCHEMA_VERSION,
        "preset": preset.name(),
        "system": if a.dummy { "dummy" } else { "fast" },
        "eps_alpha": params.eps_alpha,
        "eps_beta": params.eps_beta,
        "eta": params.eta(),
        "range": [a.y_min, a.y_max],
        "tol": a.tol,
        "reports": reports,
    });
    match &a.out {
        Some(p) => {
            write_json(p, &doc)?;
            let mut m = RunManifest::new("bifurcate", preset.name(), argv);
            m.param("range", [a.y_min, a.y_max]).param("tol", a.tol).param("regularization", params);
            m.outputs.push(p.display().to_string());
            write_json(&manifest_path(p, &a.manifest), &m)?;
            for r in &reports {
                println!("{:?} at {}", r.kind, fmt_num(r.slow_value));
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("pws").chain(args.iter().copied()))
    }

    #[test]
    fn parses_simulate_flags() {
        let cli = parse(&[
            "simulate", "--preset", "spiral", "--method", "random-euler", "--tau", "1e-5", "--seed", "42", "--t-end", "1.5",
            "--ic", "1e-6,1e-6,0.5", "--out", "traj.csv",
        ])
        .unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.preset, Preset::Spiral);
        assert_eq!(a.method, Method::RandomEuler);
        assert_eq!(a.ic, Some(vec![1e-6, 1e-6, 0.5]));
        assert_eq!(a.t_end, Some(1.5));
    }

    #[test]
    fn negative_values_are_accepted() {
        let cli = parse(&["simulate", "--preset", "nontangential", "--ic", "-1e-5,2e-5,-0.5", "--out", "x.csv"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.ic, Some(vec![-1e-5, 2e-5, -0.5]));
    }

    #[test]
    fn rejects_bad_flags() {
        assert!(parse(&["simulate", "--preset", "nope", "--out", "x"]).is_err());
        assert!(parse(&["simulate", "--preset", "spiral", "--method", "rk9", "--out", "x"]).is_err());
        assert!(parse(&["simulate", "--preset", "spiral"]).is_err());
        assert!(parse(&["fastslow", "--preset", "spiral", "--y", "1,x"]).is_err());
        assert!(parse(&["bifurcate", "--preset", "spiral", "--y-min", "0", "--y-max", "1", "--eps-alpha", "1e-3"]).is_err());
    }

    #[test]
    fn slow_state_layouts() {
        assert_eq!(slow_state(Preset::Spiral, &[0.5]).unwrap(), vec![0.0, 0.0, 0.5]);
        assert_eq!(slow_state(Preset::Ambiguous, &[3.0, 1.0]).unwrap(), vec![0.0, 0.0, 3.0, 1.0]);
        assert_eq!(slow_state(Preset::Tangential, &[4.0]).unwrap(), vec![0.0, 0.0, 0.0, 2.0]);
        assert_eq!(slow_state(Preset::Ambiguous, &[4.0]).unwrap(), vec![0.0, 0.0, 3.0, 1.0]);
        assert!(matches!(slow_state(Preset::Spiral, &[0.5, 1.0]), Err(CliError::Usage(_))));
        assert!(matches!(slow_state(Preset::Tangential, &[-1.0]), Err(CliError::Usage(_))));
    }

    #[test]
    fn list_shows_loci() {
        let s = list_text();
        for locus in ["x3^2+x4^2=2", "x3=3", "x3=1"] {
            assert!(s.contains(locus), "{s}");
        }
    }

    #[test]
    fn default_manifest_path_appends_suffix() {
        assert_eq!(manifest_path(Path::new("out/a.csv"), &None), PathBuf::from("out/a.csv.manifest.json"));
        assert_eq!(manifest_path(Path::new("a.csv"), &Some("m.json".into())), PathBuf::from("m.json"));
    }
}
