//! Argument parsing and subcommand dispatch.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rapidkrig_core::rng::ALGORITHM;
use rapidkrig_core::{
    build_setup, generate_ensemble, ConditionalSimulator, CovarianceModel, KrigingFit, PaddedGrid, Predictor, Rect,
};

use crate::covariates::Formula;
use crate::error::{CliError, Result};
use crate::io::{load_observations, GridOutput, Observations};
use crate::study::{
    parse_f64_list, parse_usize_list, run_convergence_study, run_error_study, run_timing, ConvergenceConfig, Method,
    StudyConfig, TimingConfig,
};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "RAPIDKRIG_SEED";

#[derive(Debug, Parser)]
#[command(name = "rapidkrig", version, about = "Exact and rapid grid Kriging, conditional simulation and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write the predicted surface on a grid.
    Predict(PredictArgs),
    /// Write the mean and standard error of a conditional-simulation ensemble.
    Simulate(SimulateArgs),
    /// Rapid-vs-exact accuracy over a small factorial design.
    BenchError(BenchErrorArgs),
    /// Kernel-approximation convergence under grid refinement.
    BenchConverge(BenchConvergeArgs),
    /// Wall-clock timing of exact and rapid methods.
    BenchTime(BenchTimeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Rapid,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Process variance σ².
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Scale α multiplying distance.
    #[arg(long, conflicts_with = "range", required_unless_present = "range")]
    pub alpha: Option<f64>,
    /// Range, i.e. 1/α.
    #[arg(long)]
    pub range: Option<f64>,
    /// Matérn smoothness ν.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Nugget variance τ².
    #[arg(long, default_value_t = 0.0)]
    pub tau2: f64,
}

impl ModelArgs {
    pub fn model(&self) -> Result<CovarianceModel<f64>> {
        Ok(match (self.alpha, self.range) {
            (Some(a), _) => CovarianceModel::new(self.sigma2, a, self.nu, self.tau2)?,
            (None, Some(r)) => CovarianceModel::with_range(self.sigma2, r, self.nu, self.tau2)?,
            (None, None) => return Err(CliError::Usage("one of --alpha or --range is required".into())),
        })
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Observation file with header row and columns x, y, z.
    #[arg(long)]
    pub obs: PathBuf,
    /// Output grid file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Rapid)]
    pub method: MethodArg,
    /// Neighbour order L.
    #[arg(long = "L", default_value_t = 4)]
    pub order: usize,
    /// Grid size as M1xM2 (points along x by points along y).
    #[arg(long, default_value = "100x100")]
    pub grid: String,
    /// Domain as xmin,xmax,ymin,ymax; defaults to the data's bounding box.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Trend formula over 1, x, y, x*y.
    #[arg(long, default_value = "1")]
    pub covariates: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also store every draw in the output file.
    #[arg(long)]
    pub save_draws: bool,
}

#[derive(Debug, Args)]
pub struct BenchErrorArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "200,500")]
    pub n: String,
    /// Distances at which the correlation is 0.7.
    #[arg(long, default_value = "0.2,0.4")]
    pub corr: String,
    #[arg(long, default_value = "0.5,1,1.5")]
    pub nu: String,
    #[arg(long, default_value = "0.01,0.1,0.5")]
    pub tau2: String,
    #[arg(long = "L", default_value = "2,4,8")]
    pub orders: String,
    #[arg(long, default_value = "100,200")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchConvergeArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "0.5,1,1.5,2.5")]
    pub nu: String,
    #[arg(long = "L", default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value = "20,30,40,60,80,100,140,200")]
    pub grid: String,
    /// Kernel range 1/α.
    #[arg(long, default_value_t = 0.25)]
    pub range: f64,
    /// Largest grid in the fit for a given ν, as nu:size (comma separated).
    #[arg(long, default_value = "2.5:140")]
    pub cap: String,
}

#[derive(Debug, Args)]
pub struct BenchTimeArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "200,1500")]
    pub n: String,
    #[arg(long, default_value = "60,100,140,200,350")]
    pub grid: String,
    /// Any of exact, rapid-L2, rapid-L4, rapid-L8, cs-exact, cs-fast.
    #[arg(long, default_value = "exact,rapid-L2,rapid-L4,rapid-L8")]
    pub methods: String,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Per-cell limit on the warm-up run, in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Ensemble size for the simulation methods.
    #[arg(long, default_value_t = 10)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rapidkrig: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::BenchError(a) => bench_error(a),
        Command::BenchConverge(a) => bench_converge(a),
        Command::BenchTime(a) => bench_time(a),
    }
}

/// Parses `M1xM2`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("grid must look like 128x256, got '{s}'"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Parses `xmin,xmax,ymin,ymax`.
pub fn parse_domain(s: &str) -> Result<Rect<f64>> {
    let v = parse_f64_list(s, "domain")?;
    if v.len() != 4 {
        return Err(CliError::Usage(format!("domain needs xmin,xmax,ymin,ymax, got '{s}'")));
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3])?)
}

/// The seed after applying the environment override.
pub fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

/// Everything shared by `predict` and `simulate`.
struct Prepared {
    obs: Observations,
    formula: Formula,
    grid: PaddedGrid<f64>,
    fit: KrigingFit<f64>,
    grid_x: rapidkrig_core::Matrix<f64>,
}

fn prepare(a: &GridArgs) -> Result<Prepared> {
    let model = a.model.model()?;
    let formula: Formula = a.covariates.parse()?;
    let dims = parse_grid(&a.grid)?;
    let obs = load_observations(&a.obs)?;
    if obs.is_empty() {
        return Err(CliError::Domain("no observations".into()));
    }
    if !obs.extra.is_empty() {
        let names: Vec<&str> = obs.extra.iter().map(|(n, _)| n.as_str()).collect();
        info!("ignoring extra columns {}; the trend uses coordinates only", names.join(", "));
    }
    let domain = match &a.domain {
        Some(d) => parse_domain(d)?,
        None => obs
            .bounding_box()
            .ok_or_else(|| CliError::Domain("observations do not span a rectangle; pass --domain".into()))?,
    };
    if let Some(p) = obs.locations.iter().find(|p| !domain.contains(p)) {
        return Err(CliError::Domain(format!("observation ({}, {}) lies outside the domain", p.x, p.y)));
    }
    let grid = PaddedGrid::build(domain, dims, a.order.max(1), &obs.locations)?;
    let fit = KrigingFit::fit(model, &obs.locations, &obs.z, &formula.design(&obs.locations))?;
    let grid_x = formula.design(&grid.interior_points());
    Ok(Prepared {
        obs,
        formula,
        grid,
        fit,
        grid_x,
    })
}

fn base_meta(a: &GridArgs, p: &Prepared) -> BTreeMap<String, String> {
    let m = p.fit.model();
    let mut meta = BTreeMap::new();
    meta.insert("method".into(), format!("{:?}", a.method).to_lowercase());
    meta.insert("L".into(), a.order.to_string());
    meta.insert("sigma2".into(), m.sigma2().to_string());
    meta.insert("alpha".into(), m.alpha().to_string());
    meta.insert("nu".into(), m.nu().to_string());
    meta.insert("tau2".into(), m.tau2().to_string());
    meta.insert("covariates".into(), p.formula.to_string());
    meta.insert("beta".into(), p.fit.beta_hat().iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","));
    meta.insert("n_obs".into(), p.obs.len().to_string());
    meta
}

fn output(p: &Prepared, field_names: Vec<String>, meta: BTreeMap<String, String>, payload: Vec<f64>) -> GridOutput {
    let g = &p.grid;
    let (ox, oy) = {
        let q = g.point(g.interior_to_padded(0, 0));
        (q.x, q.y)
    };
    GridOutput {
        dims: g.interior_dims(),
        origin: (ox, oy),
        spacing: g.spacing(),
        field_names,
        meta,
        payload,
    }
}

fn predict(a: &PredictArgs) -> Result<()> {
    let a = &a.grid;
    let p = prepare(a)?;
    let field = match a.method {
        MethodArg::Exact => p.fit.predict(&p.grid.interior_points(), &p.grid_x)?,
        MethodArg::Rapid => {
            let setup = build_setup(*p.fit.model(), &p.grid, a.order, &p.obs.locations)?;
            setup.predict(p.fit.c(), p.fit.beta_hat(), &p.grid_x)?
        }
    };
    let out = output(&p, vec!["prediction".into()], base_meta(a, &p), field);
    out.write(&a.out)?;
    info!("wrote {}x{} prediction to {}", out.dims.0, out.dims.1, a.out.display());
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let seed = effective_seed(a.seed)?;
    let g = &a.grid;
    if g.order < 1 {
        return Err(CliError::Domain("simulation needs L ≥ 1".into()));
    }
    let p = prepare(g)?;
    let setup = build_setup(*p.fit.model(), &p.grid, g.order, &p.obs.locations)?;
    let predictor = match g.method {
        MethodArg::Exact => Predictor::Exact,
        MethodArg::Rapid => Predictor::Rapid,
    };
    let sim = ConditionalSimulator::new(&p.fit, &setup, &p.grid_x, predictor)?;
    let ens = generate_ensemble(&sim, a.draws, seed)?;
    let mut names = vec!["mean".to_string(), "se".to_string()];
    let mut payload = ens.mean_field.clone();
    payload.extend_from_slice(&ens.empirical_se);
    if a.save_draws {
        for (j, d) in ens.draws.iter().enumerate() {
            names.push(format!("draw_{j}"));
            payload.extend_from_slice(d);
        }
    }
    let mut meta = base_meta(g, &p);
    meta.insert("rng".into(), ALGORITHM.into());
    meta.insert("seed".into(), seed.to_string());
    meta.insert("draws".into(), a.draws.to_string());
    let out = output(&p, names, meta, payload);
    out.write(&g.out)?;
    info!("wrote {}-member ensemble summary to {}", a.draws, g.out.display());
    Ok(())
}

fn bench_error(a: &BenchErrorArgs) -> Result<()> {
    let cfg = StudyConfig {
        n_obs: parse_usize_list(&a.n, "n")?,
        corr_dists: parse_f64_list(&a.corr, "correlation distance")?,
        nus: parse_f64_list(&a.nu, "nu")?,
        tau2s: parse_f64_list(&a.tau2, "tau2")?,
        orders: parse_usize_list(&a.orders, "L")?,
        grid_sizes: parse_usize_list(&a.grid, "grid")?,
        n_reps: a.reps,
        seed: effective_seed(a.seed)?,
        ..StudyConfig::default()
    };
    let study = run_error_study(&cfg)?;
    study.write_csv(&a.out)?;
    print!("{}", study.summary());
    for v in study.direction_violations() {
        println!("direction check: {v}");
    }
    Ok(())
}

fn bench_converge(a: &BenchConvergeArgs) -> Result<()> {
    let caps = a
        .cap
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let bad = || CliError::Usage(format!("cap must look like 2.5:140, got '{s}'"));
            let (nu, m) = s.split_once(':').ok_or_else(bad)?;
            Ok((nu.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = ConvergenceConfig {
        nus: parse_f64_list(&a.nu, "nu")?,
        order: a.order,
        grid_sizes: parse_usize_list(&a.grid, "grid")?,
        range: a.range,
        caps,
        ..ConvergenceConfig::default()
    };
    let study = run_convergence_study(&cfg)?;
    study.write_csv(&a.out)?;
    print!("{}", study.summary());
    Ok(())
}

fn bench_time(a: &BenchTimeArgs) -> Result<()> {
    if !(a.timeout > 0.0) {
        return Err(CliError::Domain("timeout must be positive".into()));
    }
    let cfg = TimingConfig {
        ns: parse_usize_list(&a.n, "n")?,
        grid_sizes: parse_usize_list(&a.grid, "grid")?,
        methods: a.methods.split(',').map(str::parse::<Method>).collect::<Result<_>>()?,
        reps: a.reps,
        timeout: Duration::from_secs_f64(a.timeout),
        draws: a.draws,
        seed: effective_seed(a.seed)?,
        ..TimingConfig::default()
    };
    let study = run_timing(&cfg)?;
    study.write_csv(&a.out)?;
    Ok(())
}
