//! Reproduction studies: approximation accuracy over a small factorial
//! design, kernel-approximation convergence under grid refinement, and
//! wall-clock timing of exact versus rapid prediction and simulation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{info, warn};
use rapidkrig_core::gridding::dense_candidates;
use rapidkrig_core::linalg::cholesky;
use rapidkrig_core::rng::{sub_seed, NormalStream};
use rapidkrig_core::{
    build_setup, generate_ensemble, intercept_column, kernel_approx_error, range_from_correlation,
    ConditionalSimulator, CovarianceModel, KrigingFit, PaddedGrid, Point, Predictor, Rect,
};

use crate::error::{CliError, Result};

/// Correlation that defines a "correlation distance".
pub const CORRELATION_LEVEL: f64 = 0.7;

/// Stream for observation locations; draws use streams 0–2.
const STREAM_LOCATIONS: u64 = 3;

/// `n` locations uniform on the unit square.
pub fn uniform_locations(n: usize, seed: u64) -> Vec<Point<f64>> {
    let mut s = NormalStream::new(seed, STREAM_LOCATIONS);
    (0..n).map(|_| Point::new(s.uniform(), s.uniform())).collect()
}

/// Zero-mean data `g + ε` at `locs` from the model's joint distribution,
/// driven by the given standard normals.
pub fn simulate_data(model: &CovarianceModel<f64>, locs: &[Point<f64>], normals: &[f64]) -> Result<Vec<f64>> {
    let mut m = model.cov_matrix_sym(locs)?;
    m.add_to_diagonal(model.tau2());
    let l = cholesky(&m)?;
    Ok((0..locs.len())
        .map(|i| l.row(i)[..=i].iter().zip(normals).map(|(a, b)| a * b).sum())
        .collect())
}

fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut s = NormalStream::new(seed, 0);
    (0..n).map(|_| s.next_f64()).collect()
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot parse '{t}' in {what} list")))
        })
        .collect()
}

/// Parses `a,b,c` into a list.
pub fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    parse_list(s, what)
}

pub fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    parse_list(s, what)
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Nearest interior grid node to `p` on an `m × m` lattice over the unit square.
fn nearest_node(p: &Point<f64>, m: usize) -> (usize, usize) {
    let k = |v: f64| ((v * (m - 1) as f64).round().max(0.0) as usize).min(m - 1);
    (k(p.x), k(p.y))
}

// ---------------------------------------------------------------------------
// accuracy study

/// Factor levels for the accuracy study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_obs: Vec<usize>,
    /// Distances at which the correlation equals [`CORRELATION_LEVEL`].
    pub corr_dists: Vec<f64>,
    pub nus: Vec<f64>,
    pub tau2s: Vec<f64>,
    pub orders: Vec<usize>,
    /// Square grid sizes `m` (an `m × m` grid on the unit square).
    pub grid_sizes: Vec<usize>,
    pub n_reps: usize,
    pub eval_points: Vec<Point<f64>>,
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_obs: vec![200, 500],
            corr_dists: vec![0.2, 0.4],
            nus: vec![0.5, 1.0, 1.5],
            tau2s: vec![0.01, 0.1, 0.5],
            orders: vec![2, 4, 8],
            grid_sizes: vec![100, 200],
            n_reps: 10,
            eval_points: default_eval_points(),
            sigma2: 1.0,
            seed: 1,
        }
    }
}

/// Centre, two edges and two corners of the unit square.
pub fn default_eval_points() -> Vec<Point<f64>> {
    [(0.5, 0.5), (0.5, 0.05), (0.05, 0.5), (0.05, 0.05), (0.95, 0.95)]
        .iter()
        .map(|&(x, y)| Point::new(x, y))
        .collect()
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Domain(m.to_owned()));
        if self.n_reps < 1 {
            return bad("n_reps must be at least 1");
        }
        if [self.n_obs.len(), self.corr_dists.len(), self.nus.len(), self.tau2s.len(), self.orders.len(), self.grid_sizes.len()]
            .contains(&0)
        {
            return bad("every factor needs at least one level");
        }
        if self.n_obs.iter().any(|&n| n < 2) {
            return bad("n must be at least 2");
        }
        if self.corr_dists.iter().any(|&d| !(d > 0.0)) || self.nus.iter().any(|&v| !(v > 0.0)) {
            return bad("correlation distances and smoothness must be positive");
        }
        if self.tau2s.iter().any(|&t| !(t >= 0.0)) || !(self.sigma2 > 0.0) {
            return bad("variances must be nonnegative (σ² positive)");
        }
        let max_l = *self.orders.iter().max().unwrap();
        if self.orders.contains(&0) || self.grid_sizes.iter().any(|&m| m < 2 * max_l) {
            return bad("orders must be ≥ 1 and every grid at least 2L points per side");
        }
        if self.eval_points.is_empty() || self.eval_points.iter().any(|p| !Rect::unit().contains(p)) {
            return bad("evaluation points must lie in the unit square");
        }
        Ok(())
    }
}

/// The factors of the accuracy study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    N,
    CorrDist,
    Nu,
    Tau2,
    Order,
    Grid,
}

impl Factor {
    pub const ALL: [Factor; 6] = [Factor::N, Factor::CorrDist, Factor::Nu, Factor::Tau2, Factor::Order, Factor::Grid];

    pub fn name(self) -> &'static str {
        match self {
            Factor::N => "n",
            Factor::CorrDist => "corr_dist",
            Factor::Nu => "nu",
            Factor::Tau2 => "tau2",
            Factor::Order => "L",
            Factor::Grid => "grid",
        }
    }
}

/// One design cell of the accuracy study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCell {
    pub n: usize,
    pub corr_dist: f64,
    pub nu: f64,
    pub tau2: f64,
    pub order: usize,
    pub grid: usize,
    /// Mean over replicates and evaluation points of `|rapid − exact|`.
    pub mean_abs_err: f64,
    pub reps_ok: usize,
    pub failure: Option<String>,
}

impl ErrorCell {
    pub fn log10_err(&self) -> f64 {
        self.mean_abs_err.log10()
    }

    pub fn level(&self, f: Factor) -> f64 {
        match f {
            Factor::N => self.n as f64,
            Factor::CorrDist => self.corr_dist,
            Factor::Nu => self.nu,
            Factor::Tau2 => self.tau2,
            Factor::Order => self.order as f64,
            Factor::Grid => self.grid as f64,
        }
    }

    fn ok(&self) -> bool {
        self.reps_ok > 0 && self.mean_abs_err > 0.0
    }
}

/// Result of [`run_error_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStudy {
    pub cells: Vec<ErrorCell>,
}

impl ErrorStudy {
    pub fn find(&self, n: usize, corr: f64, nu: f64, tau2: f64, order: usize, grid: usize) -> Option<&ErrorCell> {
        self.cells.iter().find(|c| {
            c.n == n && c.corr_dist == corr && c.nu == nu && c.tau2 == tau2 && c.order == order && c.grid == grid
        })
    }

    /// Mean log10 error and its standard error at each level of `f`.
    pub fn level_means(&self, f: Factor) -> Vec<(f64, f64, f64)> {
        let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for c in self.cells.iter().filter(|c| c.ok()) {
            let lv = c.level(f);
            groups.entry(lv.to_bits()).or_insert((lv, Vec::new())).1.push(c.log10_err());
        }
        let mut out: Vec<(f64, f64, f64)> = groups
            .into_values()
            .map(|(lv, v)| {
                let (m, se) = mean_and_se(&v);
                (lv, m, se)
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Average change in log10 error when `f` moves from `from` to `to`
    /// with every other factor held fixed.
    pub fn paired_effect(&self, f: Factor, from: f64, to: f64) -> Option<f64> {
        let others = |c: &ErrorCell| {
            Factor::ALL
                .iter()
                .filter(|&&g| g != f)
                .map(|&g| c.level(g).to_bits())
                .collect::<Vec<_>>()
        };
        let diffs: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.ok() && c.level(f) == from)
            .filter_map(|a| {
                let key = others(a);
                self.cells
                    .iter()
                    .find(|b| b.ok() && b.level(f) == to && others(b) == key)
                    .map(|b| b.log10_err() - a.log10_err())
            })
            .collect();
        (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64)
    }

    /// Factors among ν, L, grid size and τ² whose next level raises the
    /// mean log10 error by more than one standard error.
    pub fn direction_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in [Factor::Nu, Factor::Order, Factor::Grid, Factor::Tau2] {
            for w in self.level_means(f).windows(2) {
                let ((a, ma, sa), (b, mb, _)) = (w[0], w[1]);
                if mb > ma + sa {
                    out.push(format!("{}: {a} -> {b} raised mean log10 error {ma:.3} -> {mb:.3}", f.name()));
                }
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for f in Factor::ALL {
            let levels = self.level_means(f);
            let parts: Vec<String> = levels
                .iter()
                .map(|(lv, m, se)| format!("{lv}: {m:.3} ± {se:.3}"))
                .collect();
            let _ = writeln!(s, "mean log10 |rapid - exact| by {:<9} {}", f.name(), parts.join(", "));
        }
        let failed = self.cells.iter().filter(|c| c.failure.is_some()).count();
        if failed > 0 {
            let _ = writeln!(s, "{failed} cells recorded failures");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["n", "corr_dist", "nu", "tau2", "L", "grid", "mean_abs_err", "log10_mean_abs_err", "reps_ok", "failure"])
            .map_err(csv_err)?;
        for c in &self.cells {
            w.write_record([
                c.n.to_string(),
                c.corr_dist.to_string(),
                c.nu.to_string(),
                c.tau2.to_string(),
                c.order.to_string(),
                c.grid.to_string(),
                format!("{:e}", c.mean_abs_err),
                format!("{:.4}", c.log10_err()),
                c.reps_ok.to_string(),
                c.failure.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io("writing table", e))
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Domain(format!("cannot create {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Domain(format!("writing table: {e}"))
}

/// Mean absolute difference between rapid and exact prediction at the
/// evaluation points (snapped to grid nodes), per design cell.
///
/// Each replicate draws fresh uniform locations for each `n`; the same
/// locations and underlying normals are reused across the remaining factors
/// so that factor effects are compared on common data. Failures are recorded
/// on the cell and the study continues.
pub fn run_error_study(cfg: &StudyConfig) -> Result<ErrorStudy> {
    cfg.validate()?;
    // per cell: (sum of replicate means, replicates ok, first failure)
    let mut acc: BTreeMap<(usize, usize, usize, usize, usize, usize), (f64, usize, Option<String>)> = BTreeMap::new();
    for (ni, &n) in cfg.n_obs.iter().enumerate() {
        for rep in 0..cfg.n_reps {
            let rep_seed = sub_seed(cfg.seed, ((ni as u64) << 32) | rep as u64);
            let locs = uniform_locations(n, rep_seed);
            let normals = standard_normals(n, rep_seed);
            for (ci, &corr) in cfg.corr_dists.iter().enumerate() {
                for (vi, &nu) in cfg.nus.iter().enumerate() {
                    for (ti, &tau2) in cfg.tau2s.iter().enumerate() {
                        let res = error_replicate(cfg, &locs, &normals, corr, nu, tau2);
                        for (li, gi, r) in res {
                            let e = acc.entry((ni, ci, vi, ti, li, gi)).or_insert((0.0, 0, None));
                            match r {
                                Ok(v) => {
                                    e.0 += v;
                                    e.1 += 1;
                                }
                                Err(err) => {
                                    warn!("cell n={n} corr={corr} nu={nu} tau2={tau2}: {err}");
                                    e.2.get_or_insert(err.to_string());
                                }
                            }
                        }
                    }
                }
            }
        }
        info!("accuracy study: finished n = {n}");
    }
    let cells = acc
        .into_iter()
        .map(|((ni, ci, vi, ti, li, gi), (sum, ok, failure))| ErrorCell {
            n: cfg.n_obs[ni],
            corr_dist: cfg.corr_dists[ci],
            nu: cfg.nus[vi],
            tau2: cfg.tau2s[ti],
            order: cfg.orders[li],
            grid: cfg.grid_sizes[gi],
            mean_abs_err: if ok > 0 { sum / ok as f64 } else { f64::NAN },
            reps_ok: ok,
            failure,
        })
        .collect();
    Ok(ErrorStudy { cells })
}

type ReplicateResult = Vec<(usize, usize, Result<f64>)>;

fn error_replicate(
    cfg: &StudyConfig,
    locs: &[Point<f64>],
    normals: &[f64],
    corr: f64,
    nu: f64,
    tau2: f64,
) -> ReplicateResult {
    let all = |e: &CliError| -> ReplicateResult {
        let msg = e.to_string();
        (0..cfg.orders.len())
            .flat_map(|li| (0..cfg.grid_sizes.len()).map(move |gi| (li, gi)))
            .map(|(li, gi)| (li, gi, Err(CliError::Numeric(msg.clone()))))
            .collect()
    };
    let prepared = (|| -> Result<(CovarianceModel<f64>, KrigingFit<f64>)> {
        let alpha = range_from_correlation(nu, CORRELATION_LEVEL, corr)?;
        let model = CovarianceModel::new(cfg.sigma2, alpha, nu, tau2)?;
        let z = simulate_data(&model, locs, normals)?;
        let fit = KrigingFit::fit(model, locs, &z, &intercept_column(locs.len()))?;
        Ok((model, fit))
    })();
    let (model, fit) = match prepared {
        Ok(v) => v,
        Err(e) => return all(&e),
    };
    let mut out = Vec::new();
    for (gi, &m) in cfg.grid_sizes.iter().enumerate() {
        let nodes: Vec<(usize, usize)> = cfg.eval_points.iter().map(|p| nearest_node(p, m)).collect();
        let h = 1.0 / (m - 1) as f64;
        let targets: Vec<Point<f64>> = nodes.iter().map(|&(i, j)| Point::new(i as f64 * h, j as f64 * h)).collect();
        let exact = fit.predict(&targets, &intercept_column(targets.len()));
        for (li, &order) in cfg.orders.iter().enumerate() {
            let r = (|| -> Result<f64> {
                let exact = exact.as_ref().map_err(|e| CliError::Numeric(e.to_string()))?;
                let grid = PaddedGrid::build(Rect::unit(), (m, m), order, locs)?;
                let setup = build_setup(model, &grid, order, locs)?;
                let rapid = setup.predict(fit.c(), fit.beta_hat(), &intercept_column(grid.interior_len()))?;
                let err: f64 = nodes
                    .iter()
                    .zip(exact)
                    .map(|(&(i, j), e)| (rapid[j * m + i] - e).abs())
                    .sum();
                Ok(err / nodes.len() as f64)
            })();
            out.push((li, gi, r));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// convergence study

/// Settings for the kernel-approximation convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub nus: Vec<f64>,
    pub order: usize,
    /// Square grid sizes, strictly increasing.
    pub grid_sizes: Vec<usize>,
    /// Range `ρ = 1/α` of the kernel.
    pub range: f64,
    /// Largest grid used in the slope fit for a given ν.
    pub caps: Vec<(f64, usize)>,
    /// Samples per side of the lattice over the whole domain.
    pub global_samples: usize,
    /// Samples per side of the refined lattice around `s*`.
    pub local_samples: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            nus: vec![0.5, 1.0, 1.5, 2.5],
            order: 2,
            grid_sizes: vec![20, 30, 40, 60, 80, 100, 140, 200],
            range: 0.25,
            caps: vec![(2.5, 140)],
            global_samples: 101,
            local_samples: 61,
        }
    }
}

/// Values of Λ below this are numerically meaningless and are excluded.
pub const LAMBDA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub nu: f64,
    pub grid: usize,
    /// Fill distance `h√2/2`.
    pub delta: f64,
    pub lambda: f64,
    pub included: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSlope {
    pub nu: f64,
    /// `ν − 1/2`.
    pub kappa_theory: f64,
    /// Least-squares slope of `log10 Λ` against `log10(1/δ)`, negated.
    pub kappa_emp: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    pub slopes: Vec<ConvergenceSlope>,
}

impl ConvergenceStudy {
    pub fn slope(&self, nu: f64) -> Option<&ConvergenceSlope> {
        self.slopes.iter().find(|s| s.nu == nu)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["nu", "grid", "delta", "lambda", "included", "note"]).map_err(csv_err)?;
        for p in &self.points {
            w.write_record([
                p.nu.to_string(),
                p.grid.to_string(),
                format!("{:e}", p.delta),
                format!("{:e}", p.lambda),
                p.included.to_string(),
                p.note.clone(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io("writing table", e))
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("nu,kappa_theory,kappa_empirical,points\n");
        for sl in &self.slopes {
            let _ = writeln!(s, "{},{},{:.3},{}", sl.nu, sl.kappa_theory, sl.kappa_emp, sl.points_used);
        }
        s
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `Λ = sup_s |k_approx(s, s*) − k(s, s*)|` with `s*` at the centre of the
/// central grid box, over a ladder of grids on the unit square.
///
/// The supremum is taken over a lattice covering the domain together with a
/// finer lattice over the `2L × 2L` block around `s*`, where the error peaks.
pub fn run_convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceStudy> {
    if cfg.grid_sizes.windows(2).any(|w| w[1] <= w[0]) || cfg.grid_sizes.len() < 2 {
        return Err(CliError::Domain("grid ladder must have at least two strictly increasing sizes".into()));
    }
    if !(cfg.range > 0.0) {
        return Err(CliError::Domain("range must be positive".into()));
    }
    let global = dense_candidates(&Rect::unit(), cfg.global_samples);
    let mut points = Vec::new();
    let mut slopes = Vec::new();
    for &nu in &cfg.nus {
        let model = CovarianceModel::with_range(1.0, cfg.range, nu, 0.0)?;
        let cap = cfg.caps.iter().find(|c| c.0 == nu).map(|c| c.1);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &m in &cfg.grid_sizes {
            let grid = PaddedGrid::build(Rect::unit(), (m, m), cfg.order, &[])?;
            let h = grid.spacing().0;
            let c = (m - 1) / 2;
            let corner = grid.point(grid.index(c, c));
            let s_star = Point::new(corner.x + 0.5 * h, corner.y + 0.5 * h);
            let reach = cfg.order as f64 * h;
            let local = Rect::new(s_star.x - reach, s_star.x + reach, s_star.y - reach, s_star.y + reach)?;
            let mut eval = global.clone();
            eval.extend(dense_candidates(&local, cfg.local_samples));
            let lambda = kernel_approx_error(&model, &grid, cfg.order, &s_star, &eval)?.sup;
            let delta = h * std::f64::consts::SQRT_2 / 2.0;
            let (included, note) = if lambda < LAMBDA_FLOOR {
                (false, format!("below {LAMBDA_FLOOR:e}"))
            } else if cap.is_some_and(|cap| m > cap) {
                (false, format!("above {}x{} cap for this smoothness", cap.unwrap(), cap.unwrap()))
            } else {
                (true, String::new())
            };
            if included {
                xs.push((1.0 / delta).log10());
                ys.push(lambda.log10());
            }
            points.push(ConvergencePoint {
                nu,
                grid: m,
                delta,
                lambda,
                included,
                note,
            });
        }
        let kappa_emp = if xs.len() >= 2 { -ls_slope(&xs, &ys) } else { f64::NAN };
        slopes.push(ConvergenceSlope {
            nu,
            kappa_theory: nu - 0.5,
            kappa_emp,
            points_used: xs.len(),
        });
    }
    Ok(ConvergenceStudy { points, slopes })
}

// ---------------------------------------------------------------------------
// timing study

/// A timed method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Rapid(usize),
    /// Fast conditional simulation with exact prediction.
    CsExact,
    /// Fast conditional simulation with rapid prediction (L = 4).
    CsFast,
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Method::Exact),
            "rapid-L2" => Ok(Method::Rapid(2)),
            "rapid-L4" => Ok(Method::Rapid(4)),
            "rapid-L8" => Ok(Method::Rapid(8)),
            "cs-exact" => Ok(Method::CsExact),
            "cs-fast" => Ok(Method::CsFast),
            other => Err(CliError::Usage(format!(
                "unknown method '{other}'; choose from exact, rapid-L2, rapid-L4, rapid-L8, cs-exact, cs-fast"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => f.write_str("exact"),
            Method::Rapid(l) => write!(f, "rapid-L{l}"),
            Method::CsExact => f.write_str("cs-exact"),
            Method::CsFast => f.write_str("cs-fast"),
        }
    }
}

/// Order used by both simulation schemes.
pub const CS_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub ns: Vec<usize>,
    pub grid_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub reps: usize,
    /// A cell whose warm-up run exceeds this is recorded as censored.
    pub timeout: Duration,
    pub draws: usize,
    pub nu: f64,
    pub range: f64,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            ns: vec![200, 1500],
            grid_sizes: vec![60, 100, 140, 200, 350],
            methods: vec![Method::Exact, Method::Rapid(2), Method::Rapid(4), Method::Rapid(8)],
            reps: 3,
            timeout: Duration::from_secs(60),
            draws: 10,
            nu: 1.0,
            range: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub n: usize,
    pub grid: usize,
    /// Median one-time setup (rapid methods only).
    pub setup_s: Option<f64>,
    /// Median time of the repeated phase: one prediction, or a whole ensemble.
    pub run_s: Option<f64>,
    pub reps: usize,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStudy {
    pub rows: Vec<TimingRow>,
}

impl TimingStudy {
    pub fn row(&self, method: Method, n: usize, grid: usize) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n && r.grid == grid)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["method", "n", "grid", "setup_median_s", "run_median_s", "reps", "censored"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|t| format!("{t:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.n.to_string(),
                format!("{0}x{0}", r.grid),
                opt(r.setup_s),
                opt(r.run_s),
                r.reps.to_string(),
                r.censored.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io("writing table", e))
    }
}

fn time<T>(f: impl FnOnce() -> Result<T>) -> Result<(f64, T)> {
    let t = Instant::now();
    let v = f()?;
    Ok((t.elapsed().as_secs_f64(), v))
}

/// Median wall-clock times per (method, n, grid), after one discarded
/// warm-up run. Rapid methods report setup and prediction separately.
pub fn run_timing(cfg: &TimingConfig) -> Result<TimingStudy> {
    if cfg.reps < 3 {
        return Err(CliError::Domain("timing needs at least 3 repetitions".into()));
    }
    if cfg.methods.is_empty() || cfg.ns.is_empty() || cfg.grid_sizes.is_empty() {
        return Err(CliError::Domain("timing needs methods, sample sizes and grids".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let locs = uniform_locations(n, sub_seed(cfg.seed, n as u64));
        let mut noise = NormalStream::new(cfg.seed, 4);
        let z: Vec<f64> = locs
            .iter()
            .map(|p| (6.0 * p.x).sin() + (4.0 * p.y).cos() + 0.1 * noise.next_f64())
            .collect();
        let model = CovarianceModel::with_range(1.0, cfg.range, cfg.nu, 0.1)?;
        let fit = KrigingFit::fit(model, &locs, &z, &intercept_column(n))?;
        for &m in &cfg.grid_sizes {
            let gx = intercept_column(m * m);
            for &method in &cfg.methods {
                let row = time_cell(cfg, method, &fit, &locs, m, &gx)?;
                info!(
                    "timing {method} n={n} grid={m}x{m}: setup {:?} run {:?}{}",
                    row.setup_s,
                    row.run_s,
                    if row.censored { " (censored)" } else { "" }
                );
                rows.push(row);
            }
        }
    }
    Ok(TimingStudy { rows })
}

fn time_cell(
    cfg: &TimingConfig,
    method: Method,
    fit: &KrigingFit<f64>,
    locs: &[Point<f64>],
    m: usize,
    gx: &rapidkrig_core::Matrix<f64>,
) -> Result<TimingRow> {
    let model = *fit.model();
    let order = match method {
        Method::Rapid(l) => l,
        _ => CS_ORDER,
    };
    // one timed sample: (setup seconds, run seconds)
    let sample = |k: u64| -> Result<(Option<f64>, f64)> {
        match method {
            Method::Exact => {
                let grid = PaddedGrid::build(Rect::unit(), (m, m), 1, &[])?;
                let pts = grid.interior_points();
                let (t, _) = time(|| Ok(fit.predict(&pts, gx)?))?;
                Ok((None, t))
            }
            Method::Rapid(l) => {
                let (ts, setup) = time(|| {
                    let grid = PaddedGrid::build(Rect::unit(), (m, m), l, locs)?;
                    Ok(build_setup(model, &grid, l, locs)?)
                })?;
                let (tp, _) = time(|| Ok(setup.predict(fit.c(), fit.beta_hat(), gx)?))?;
                Ok((Some(ts), tp))
            }
            Method::CsExact | Method::CsFast => {
                let predictor = if method == Method::CsFast { Predictor::Rapid } else { Predictor::Exact };
                let (ts, setup) = time(|| {
                    let grid = PaddedGrid::build(Rect::unit(), (m, m), order, locs)?;
                    Ok(build_setup(model, &grid, order, locs)?)
                })?;
                let (tr, _) = time(|| {
                    let sim = ConditionalSimulator::new(fit, &setup, gx, predictor)?;
                    Ok(generate_ensemble(&sim, cfg.draws, sub_seed(cfg.seed, k))?)
                })?;
                Ok((Some(ts), tr))
            }
        }
    };
    let (warm_setup, warm_run) = sample(0)?;
    let warm_total = warm_setup.unwrap_or(0.0) + warm_run;
    let mut row = TimingRow {
        method,
        n: fit.n(),
        grid: m,
        setup_s: None,
        run_s: None,
        reps: 0,
        censored: false,
    };
    if warm_total > cfg.timeout.as_secs_f64() {
        row.censored = true;
        return Ok(row);
    }
    let (mut setups, mut runs) = (Vec::new(), Vec::new());
    for k in 1..=cfg.reps as u64 {
        let (s, r) = sample(k)?;
        if let Some(s) = s {
            setups.push(s);
        }
        runs.push(r);
    }
    row.setup_s = (!setups.is_empty()).then(|| median(&mut setups));
    row.run_s = Some(median(&mut runs));
    row.reps = cfg.reps;
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 4.0 - 2.5 * v).collect();
        assert!((ls_slope(&x, &y) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn methods_round_trip() {
        for s in ["exact", "rapid-L2", "rapid-L4", "rapid-L8", "cs-exact", "cs-fast"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("rapid-L3".parse::<Method>().is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn simulated_data_has_model_covariance() {
        let model = CovarianceModel::new(2.0, 3.0, 1.0, 0.5).unwrap();
        let locs = [Point::new(0.2, 0.2), Point::new(0.3, 0.25)];
        let reps = 20_000;
        let (mut s00, mut s01) = (0.0, 0.0);
        for k in 0..reps {
            let z = simulate_data(&model, &locs, &standard_normals(2, k)).unwrap();
            s00 += z[0] * z[0];
            s01 += z[0] * z[1];
        }
        let (v, c) = (s00 / reps as f64, s01 / reps as f64);
        assert!((v - 2.5).abs() < 0.1, "{v}");
        assert!((c - model.cov(&locs[0], &locs[1])).abs() < 0.1, "{c}");
    }

    #[test]
    fn tiny_error_study_runs() {
        let cfg = StudyConfig {
            n_obs: vec![30],
            corr_dists: vec![0.2],
            nus: vec![0.5, 1.5],
            tau2s: vec![0.1],
            orders: vec![2, 4],
            grid_sizes: vec![24],
            n_reps: 2,
            ..StudyConfig::default()
        };
        let s = run_error_study(&cfg).unwrap();
        assert_eq!(s.cells.len(), 4);
        assert!(s.cells.iter().all(|c| c.reps_ok == 2 && c.mean_abs_err > 0.0));
        assert!(s.paired_effect(Factor::Order, 2.0, 4.0).unwrap() < 0.0);
        assert!(s.summary().contains("by nu"));
    }
}
