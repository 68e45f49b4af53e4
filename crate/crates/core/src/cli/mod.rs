//! Experiment runner behind the `hypobridge` binary.
//!
//! Every command reads a flat JSON [`Config`], applies `--set key=value`
//! overrides and subcommand flags, and writes its files plus a
//! `manifest.json` to `out/<experiment>/<timestamp>-<seed>/`.
//!
//! Exit codes: 0 pass, 2 verification failure, 1 execution error, 64 usage.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::bridge::{
    bridge_ensemble, bridge_kernel_times, diffusion_ensemble, write_ensemble, write_paths_csv, BridgeConfig,
    BridgeError, DiffusionConfig,
};
use crate::ccdist::{cc_distance_with, write_ccdist_csv, CcOptions, CcStatus};
use crate::heatkernel::{
    heisenberg_quadrature_kernel, kernel_value, mc_kde_kernel, read_kernel, solve_heat_grid, solve_heat_grid_to,
    write_kernel, BandwidthRule, GridMesh, KdeOptions, KernelError, KernelEstimate, KernelRepr,
};
use crate::models::{hormander_level, ModelError, Point, SpaceKind, VectorFieldSystem};
use crate::verify::{run_suite, write_reports_csv, Suite, SuiteOptions, VerifyError};

pub mod config;
pub mod manifest;
pub mod report;

pub use config::Config;
pub use manifest::{Artifact, ExperimentManifest, PathAccounting, RunDir, SCHEMA_VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const CACHE_ENV: &str = "HYPOBRIDGE_CACHE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("incompatible artifacts:\n  {}", .0.join("\n  "))]
    Artifacts(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownModel(_) => CliError::Usage(e.to_string()),
            other => CliError::Model(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hypobridge", version, about = "Hypoelliptic diffusion bridges and their numerical checks")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Kernel file to reuse if present, or to write otherwise.
    #[arg(long, global = true)]
    pub kernel_cache: Option<PathBuf>,
    /// Root of the output tree.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    #[arg(long)]
    pub model: Option<String>,
    /// Start point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<String>,
    /// End point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hörmander levels over a grid of points.
    BracketCheck(Common),
    /// Grid heat kernel on a torus model.
    HeatSolve(Common),
    /// Monte Carlo kernel density estimate of the heat kernel.
    Kde(Common),
    /// Unconditioned diffusion paths.
    Simulate(Common),
    /// Bridge paths pinned at `--to` at time 1.
    Bridge(Common),
    /// Control distance upper bound between two points.
    Ccdist(Common),
    /// A named verification suite.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Merge run directories into one summary.
    Report { inputs: Vec<PathBuf> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BracketCheck(_) => "bracket-check",
            Command::HeatSolve(_) => "heat-solve",
            Command::Kde(_) => "kde",
            Command::Simulate(_) => "simulate",
            Command::Bridge(_) => "bridge",
            Command::Ccdist(_) => "ccdist",
            Command::Verify { .. } => "verify",
            Command::Report { .. } => "report",
        }
    }

    fn common(&self) -> Option<&Common> {
        match self {
            Command::BracketCheck(c)
            | Command::HeatSolve(c)
            | Command::Kde(c)
            | Command::Simulate(c)
            | Command::Bridge(c)
            | Command::Ccdist(c) => Some(c),
            Command::Verify { common, .. } => Some(common),
            Command::Report { .. } => None,
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok((dir, pass)) => {
            println!("{}", dir.display());
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Configuration after file, `--set`, subcommand flags and `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut overrides = cli.set.clone();
    if let Some(c) = cli.command.common() {
        if let Some(m) = &c.model {
            overrides.push(format!("model=\"{m}\""));
        }
        if let Some(p) = &c.from {
            overrides.push(format!("from=[{p}]"));
        }
        if let Some(p) = &c.to {
            overrides.push(format!("to=[{p}]"));
        }
        if let Some(n) = c.paths {
            overrides.push(format!("paths={n}"));
        }
    }
    if let Command::Verify { suite: Some(s), .. } = &cli.command {
        overrides.push(format!("suite=\"{s}\""));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    Config::load(cli.config.as_deref())?.apply(&overrides)
}

/// Runs the parsed command; returns the run directory and pass flag.
pub fn execute(cli: &Cli) -> Result<(PathBuf, bool), CliError> {
    let cfg = resolve_config(cli)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let name = cli.command.name();
    let experiment = cfg.experiment.clone().unwrap_or_else(|| match &cli.command {
        Command::Verify { .. } => format!("verify-{}", cfg.suite),
        _ => name.to_string(),
    });
    if let Command::Verify { .. } = cli.command {
        cfg.suite.parse::<Suite>().map_err(CliError::Usage)?;
    }
    let sys = match cli.command {
        Command::Report { .. } | Command::Verify { .. } => None,
        _ => Some(VectorFieldSystem::from_name(&cfg.model)?),
    };
    let mut run = RunDir::create(&cli.out, &experiment, name, &cfg)?;
    let pass = match (&cli.command, &sys) {
        (Command::BracketCheck(_), Some(sys)) => bracket_check(&mut run, &cfg, sys)?,
        (Command::HeatSolve(_), Some(sys)) => heat_solve(&mut run, &cfg, sys, cli.kernel_cache.as_deref())?,
        (Command::Kde(_), Some(sys)) => kde(&mut run, &cfg, sys, cli.kernel_cache.as_deref())?,
        (Command::Simulate(_), Some(sys)) => simulate(&mut run, &cfg, sys)?,
        (Command::Bridge(_), Some(sys)) => bridge(&mut run, &cfg, sys, cli.kernel_cache.as_deref())?,
        (Command::Ccdist(_), Some(sys)) => ccdist(&mut run, &cfg, sys)?,
        (Command::Verify { .. }, _) => verify(&mut run, &cfg)?,
        (Command::Report { inputs }, _) => report(&mut run, inputs)?,
        _ => unreachable!("model resolved for every model command"),
    };
    if !matches!(cli.command, Command::Report { .. }) {
        run.manifest.pass = Some(pass);
    }
    Ok((run.finish()?, pass))
}

fn point(sys: &VectorFieldSystem, coords: &[f64], default: &[f64], what: &str) -> Result<Point, CliError> {
    let c = if coords.is_empty() { default } else { coords };
    if c.len() != sys.dim() {
        return Err(CliError::Usage(format!(
            "{what} has {} coordinates, model {} needs {}",
            c.len(),
            sys.name,
            sys.dim()
        )));
    }
    Ok(Point::new(c))
}

fn is_torus(sys: &VectorFieldSystem) -> bool {
    sys.space.is_compact() && sys.dim() == 2
}

fn start(sys: &VectorFieldSystem, cfg: &Config) -> Result<Point, CliError> {
    let d: &[f64] = if is_torus(sys) { &[0.25, 0.25] } else { &[0.0, 0.0, 0.0] };
    point(sys, &cfg.from, d, "from")
}

fn end(sys: &VectorFieldSystem, cfg: &Config) -> Result<Point, CliError> {
    let d: &[f64] = match sys.space.kind {
        SpaceKind::Heisenberg3 => &[1.0, 1.0, 0.5],
        _ if is_torus(sys) => &[0.5, 0.625],
        _ => &[0.3, 0.0, 0.0],
    };
    point(sys, &cfg.to, d, "to")
}

fn csv_writer(run: &mut RunDir, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(run.output(name)?)?))
}

/// Reuses a kernel file when one exists, otherwise builds and stores it.
fn cached_kernel(
    run: &mut RunDir,
    explicit: Option<&Path>,
    key: &str,
    model: &str,
    build: impl FnOnce() -> Result<KernelEstimate, CliError>,
) -> Result<KernelEstimate, CliError> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let name = format!("kernel-{:.16x}.hbk", Sha256::digest(key.as_bytes()));
            match std::env::var_os(CACHE_ENV) {
                Some(d) => PathBuf::from(d).join(name),
                None => run.dir.join("cache").join(name),
            }
        }
    };
    if path.exists() {
        let k = read_kernel(&path)?;
        if k.model != model {
            return Err(CliError::Usage(format!(
                "kernel cache {} is for model {}, not {model}",
                path.display(),
                k.model
            )));
        }
        run.input(&path)?;
        return Ok(k);
    }
    let k = build()?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_kernel(&k, &path)?;
    run.record(&path);
    Ok(k)
}

fn bracket_check(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem) -> Result<bool, CliError> {
    let n = cfg.grid_points.max(1);
    let axis = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let pts: Vec<Point> = if is_torus(sys) {
        (0..n * n).map(|k| Point::new(&[axis(k / n, 0.0, 1.0), axis(k % n, 0.0, 1.0)])).collect()
    } else {
        (0..n * n * n)
            .map(|k| Point::new(&[axis(k / (n * n), -1.0, 1.0), axis(k / n % n, -1.0, 1.0), axis(k % n, -1.0, 1.0)]))
            .collect()
    };
    let mut w = csv_writer(run, "levels.csv")?;
    write!(w, "point")?;
    for j in 0..sys.dim() {
        write!(w, ",x{j}")?;
    }
    writeln!(w, ",level")?;
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for (i, p) in pts.iter().enumerate() {
        let l = hormander_level(sys, p, cfg.max_level)?.level();
        write!(w, "{i}")?;
        for v in p.iter() {
            write!(w, ",{v}")?;
        }
        let label = l.map(|l| l.to_string()).unwrap_or_default();
        writeln!(w, ",{label}")?;
        *counts.entry(if label.is_empty() { "none".into() } else { label }).or_default() += 1;
    }
    w.flush()?;
    for (l, c) in &counts {
        eprintln!("level {l}: {c} points");
    }
    Ok(!counts.contains_key("none"))
}

fn write_kernel_table(run: &mut RunDir, k: &KernelEstimate, x: &Point) -> Result<(), CliError> {
    let mut w = csv_writer(run, "kernel.csv")?;
    writeln!(w, "t,mass,value_at_start,std_error")?;
    for (i, &t) in k.times.iter().enumerate() {
        let v = kernel_value(k, t, x, x)?;
        writeln!(w, "{t},{},{},{}", k.mass[i], v.value, v.std_error)?;
    }
    w.flush()?;
    Ok(())
}

fn heat_solve(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem, cache: Option<&Path>) -> Result<bool, CliError> {
    let mesh = GridMesh::new(cfg.mesh);
    let (anchor, target) = match cfg.anchor.as_str() {
        "source" => (start(sys, cfg)?, false),
        "target" => (end(sys, cfg)?, true),
        other => return Err(CliError::Usage(format!("anchor must be source or target, got {other:?}"))),
    };
    let key = format!("grid|{}|{anchor}|{target}|{:?}|{}", sys.name, cfg.times, cfg.mesh);
    let k = cached_kernel(run, cache, &key, &sys.name, || {
        Ok(if target {
            solve_heat_grid_to(sys, &anchor, &cfg.times, &mesh)?
        } else {
            solve_heat_grid(sys, &anchor, &cfg.times, &mesh)?
        })
    })?;
    write_kernel_table(run, &k, &anchor)?;
    Ok(true)
}

fn kde(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem, cache: Option<&Path>) -> Result<bool, CliError> {
    let x = start(sys, cfg)?;
    let n = cfg.paths.unwrap_or(20_000);
    let opts = KdeOptions {
        dt: cfg.dt,
        bandwidth: BandwidthRule::Scott {
            factor: cfg.bandwidth_factor,
        },
        ..KdeOptions::default()
    };
    let key = format!("kde|{}|{x}|{:?}|{n}|{}|{}|{}", sys.name, cfg.times, cfg.dt, cfg.bandwidth_factor, cfg.seed);
    let k = cached_kernel(run, cache, &key, &sys.name, || Ok(mc_kde_kernel(sys, &x, &cfg.times, n, &opts, cfg.seed)?))?;
    write_kernel_table(run, &k, &x)?;
    Ok(true)
}

fn simulate(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem) -> Result<bool, CliError> {
    let x = start(sys, cfg)?;
    let n = cfg.paths.unwrap_or(100);
    let paths = diffusion_ensemble(sys, &x, &DiffusionConfig::new(cfg.horizon, cfg.dt), cfg.seed, n)?;
    write_paths_csv(File::create(run.output("paths.csv")?)?, &paths)?;
    write_ensemble(
        &run.output("ensemble.hbe")?,
        &sys.name,
        &paths,
        serde_json::json!({ "seed": cfg.seed, "horizon": cfg.horizon, "dt": cfg.dt }),
    )?;
    Ok(true)
}

fn bridge(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem, cache: Option<&Path>) -> Result<bool, CliError> {
    let x0 = start(sys, cfg)?;
    let z0 = end(sys, cfg)?;
    let mut bc = BridgeConfig::new(x0, z0, cfg.seed);
    bc.dt = cfg.dt;
    bc.epsilon = cfg.epsilon;
    bc.pinning = cfg.pinning;
    let k = if is_torus(sys) {
        let times = bridge_kernel_times(cfg.dt, cfg.epsilon);
        let key = format!("bridge-grid|{}|{z0}|{}|{}|{}", sys.name, cfg.dt, cfg.epsilon, cfg.mesh);
        cached_kernel(run, cache, &key, &sys.name, || {
            Ok(solve_heat_grid_to(sys, &z0, &times, &GridMesh::new(cfg.mesh))?)
        })?
    } else if sys.space.kind == SpaceKind::Heisenberg3 {
        let t_min = 0.8 * cfg.epsilon.min(0.02);
        let key = format!("heisenberg-quadrature|{}|{t_min}", sys.name);
        cached_kernel(run, cache, &key, &sys.name, || {
            Ok(heisenberg_quadrature_kernel(sys, t_min, 1.0, None)?)
        })?
    } else {
        return Err(KernelError::Unsupported(format!("no bridge kernel for model {}", sys.name)).into());
    };
    if let KernelRepr::Grid(_) = k.repr {
        bc.kernel_ref = Some("grid".into());
    }
    let ens = bridge_ensemble(&bc, sys, &k, cfg.paths.unwrap_or(1000))?;
    write_paths_csv(File::create(run.output("paths.csv")?)?, &ens.paths)?;
    write_ensemble(
        &run.output("ensemble.hbe")?,
        &sys.name,
        &ens.paths,
        serde_json::json!({
            "cfg": &ens.cfg,
            "failure_fraction": ens.failure_fraction(),
            "failures": &ens.failures,
        }),
    )?;
    let frac = ens.failure_fraction();
    run.manifest.path_accounting = Some(PathAccounting {
        requested: ens.requested,
        failed: ens.failures.len(),
        failure_fraction: frac,
        clamped_fraction: ens.clamped_fraction(),
    });
    Ok(frac < 0.1)
}

fn ccdist(run: &mut RunDir, cfg: &Config, sys: &VectorFieldSystem) -> Result<bool, CliError> {
    let x = start(sys, cfg)?;
    let y = end(sys, cfg)?;
    let opts = CcOptions {
        n_segments: cfg.n_segments,
        restarts: cfg.restarts,
        ..CcOptions::default()
    };
    let r = cc_distance_with(sys, &x, &y, &opts, cfg.seed);
    let ok = r.status == CcStatus::Converged;
    write_ccdist_csv(File::create(run.output("ccdist.csv")?)?, &[(x, y, r)], &opts)?;
    Ok(ok)
}

fn verify(run: &mut RunDir, cfg: &Config) -> Result<bool, CliError> {
    let suite: Suite = cfg.suite.parse().map_err(CliError::Usage)?;
    let opts = SuiteOptions {
        seed: cfg.seed,
        paths: cfg.paths.unwrap_or(SuiteOptions::default().paths),
        mesh: cfg.mesh,
        dt: cfg.dt,
        epsilons: cfg.epsilons.clone(),
        permutations: cfg.permutations,
    };
    let reports = run_suite(suite, &opts)?;
    std::fs::write(
        run.output("reports.json")?,
        serde_json::to_string_pretty(&reports).expect("reports serialize"),
    )?;
    write_reports_csv(csv_writer(run, "reports.csv")?, &reports)?;
    for r in &reports {
        eprintln!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.statistic);
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn report(run: &mut RunDir, inputs: &[PathBuf]) -> Result<bool, CliError> {
    let groups = report::collect(inputs)?;
    for (_, runs) in &groups {
        for (_, dir, _) in runs {
            let m = dir.join("manifest.json");
            run.input(&m)?;
        }
    }
    let summary = report::summarize(&groups);
    std::fs::write(
        run.output("summary.json")?,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    report::write_sweeps(csv_writer(run, "sweeps.csv")?, &groups)?;
    report::write_fits(csv_writer(run, "fits.csv")?, &groups)?;
    report::write_residuals(csv_writer(run, "residuals.csv")?, &groups)?;
    Ok(true)
}
