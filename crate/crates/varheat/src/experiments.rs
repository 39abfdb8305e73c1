//! Monte Carlo orchestration: replicate management, error curves against `N`,
//! log-log rate regression and estimator accuracy tables.
//!
//! Every replicate draws one path on the finest grid and the coarser grids are
//! nested subsamples of it, so each replicate contributes one error per `N`.
//! Results are collected by replicate index; the worker count never changes a
//! report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use varheat_core::estimators::{
    estimate_alpha, estimate_theta_power, estimate_theta_quadratic, limits_from_constants,
};
use varheat_core::gaussian::{
    b0_alpha, c0_alpha, even_power, FbmSampler, PerturbedFbmSampler, PerturbedFbmSpec, U0Sampler,
    U0SpectralSampler, U0_FACTOR_CAP,
};
use varheat_core::path::Path;
use varheat_core::rng::{NormalStream, Substream};
use varheat_core::spde::{
    coupled_increment_ladder, coupling_exponent, solve_nonlinear_replicate,
    solve_parametrized_replicate, CouplingOptions, SimConfig, SolverMethod,
};
use varheat_core::variations::{
    fbm_normalized_variation, mean_and_se, median, ols_slope, power_variation,
    quad_variation_renorm,
};
use varheat_core::{KernelParams, SigmaSpec};

use crate::error::{AppError, AppResult};

/// Slope tolerance around the theoretical exponent.
pub const SLOPE_TOLERANCE: f64 = 0.2;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_REPLICATES: usize = 100;
pub const MIN_GRID_POINTS: usize = 4;

/// Worker pool capped by `VARHEAT_THREADS` when set.
pub fn thread_pool() -> AppResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("VARHEAT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| AppError::Invalid(format!("VARHEAT_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| AppError::Invalid(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateTarget {
    FbmVn,
    PerturbedVn,
    U0Vn,
    NonlinearVn,
    NonlinearUn,
}

impl RateTarget {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fbm_vn" => Self::FbmVn,
            "perturbed_vn" => Self::PerturbedVn,
            "u0_vn" => Self::U0Vn,
            "nonlinear_vn" => Self::NonlinearVn,
            "nonlinear_un" => Self::NonlinearUn,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FbmVn => "fbm_vn",
            Self::PerturbedVn => "perturbed_vn",
            Self::U0Vn => "u0_vn",
            Self::NonlinearVn => "nonlinear_vn",
            Self::NonlinearUn => "nonlinear_un",
        }
    }

    fn is_nonlinear(&self) -> bool {
        matches!(self, Self::NonlinearVn | Self::NonlinearUn)
    }

    /// Squared errors for the Gaussian targets, absolute errors for the
    /// nonlinear ones.
    pub fn default_metric(&self) -> ErrorMetric {
        if self.is_nonlinear() {
            ErrorMetric::Absolute
        } else {
            ErrorMetric::Squared
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// Mean of `|statistic - limit|`.
    Absolute,
    /// Mean of `(statistic - limit)^2`.
    Squared,
}

impl ErrorMetric {
    fn apply(&self, e: f64) -> f64 {
        match self {
            Self::Absolute => e.abs(),
            Self::Squared => e * e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub name: String,
    pub theoretical_exponent: f64,
    pub source: String,
}

/// `(alpha - 1)(1 - 2 alpha) / (2 alpha (2 alpha + 1))`.
pub fn nonlinear_exponent(alpha: f64) -> f64 {
    (alpha - 1.0) * (1.0 - 2.0 * alpha) / (2.0 * alpha * (2.0 * alpha + 1.0))
}

pub fn rate_spec(target: RateTarget, metric: ErrorMetric, alpha: f64) -> RateSpec {
    let (exp, source) = match target {
        RateTarget::FbmVn => (-1.0, "fBm quadratic variation, L2 rate"),
        RateTarget::PerturbedVn => (-1.0, "perturbed fBm quadratic variation, L2 rate for H < 1/2"),
        RateTarget::U0Vn => (-1.0, "linear solution quadratic variation, L2 rate"),
        RateTarget::NonlinearVn => (nonlinear_exponent(alpha), "nonlinear quadratic variation, L1 rate"),
        RateTarget::NonlinearUn => (nonlinear_exponent(alpha), "nonlinear power variation, L1 rate"),
    };
    // the Gaussian rates are stated for the mean square; the nonlinear ones
    // for the mean absolute error
    let exp = match (target.is_nonlinear(), metric) {
        (false, ErrorMetric::Absolute) => exp / 2.0,
        (true, ErrorMetric::Squared) => 2.0 * exp,
        _ => exp,
    };
    RateSpec {
        name: target.as_str().to_string(),
        theoretical_exponent: exp,
        source: source.to_string(),
    }
}

/// Parameters shared by the experiments. Fields irrelevant to a target are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub alpha: f64,
    pub hurst: f64,
    pub theta: f64,
    pub sigma: SigmaSpec,
    /// Leading constant of the perturbed fBm.
    pub c0: f64,
    pub perturbation_scale: f64,
    pub n_space: usize,
    /// Half-width `L` of the periodic domain; `5 t_horizon^(1/alpha)` when `None`.
    pub half_length: Option<f64>,
    /// Solver steps per observation interval of the finest grid.
    pub substeps: usize,
    pub subgrid_correction: bool,
    pub metric: Option<ErrorMetric>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            hurst: 0.25,
            theta: 1.0,
            sigma: SigmaSpec::ONE,
            c0: 1.0,
            perturbation_scale: 1.0,
            n_space: 1024,
            half_length: None,
            substeps: 16,
            subgrid_correction: true,
            metric: None,
        }
    }
}

impl ExperimentParams {
    /// Solver configuration observing `n_max` points of `u_theta` on `[0, 1]`.
    pub fn sim_config(&self, n_max: usize, seed: u64) -> AppResult<SimConfig> {
        let t_horizon = self.theta.max(1.0);
        let mut c = SimConfig::new(self.alpha, self.theta, self.sigma, n_max);
        c.t_horizon = t_horizon;
        c.n_space = self.n_space;
        c.half_length = self
            .half_length
            .unwrap_or(5.0 * t_horizon.powf(1.0 / self.alpha));
        let n_time = self.substeps as f64 * n_max as f64 * t_horizon / self.theta;
        if (n_time - n_time.round()).abs() > 1e-9 * n_time {
            return Err(AppError::Invalid(format!(
                "substeps * N * t_horizon / theta = {n_time} must be an integer"
            )));
        }
        c.n_time = n_time.round() as usize;
        c.seed = seed;
        c.subgrid_correction = self.subgrid_correction;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Fitted slope within the tolerance window of the theory.
    Consistent,
    /// Faster decay than the bound; informational.
    FasterThanBound,
    SlowerThanBound,
    /// The error sequence does not decrease.
    NotDecreasing,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Consistent | Verdict::FasterThanBound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub target: String,
    pub metric: String,
    pub n_values: Vec<usize>,
    pub errors: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_ci: (f64, f64),
    pub replicates: usize,
    pub seed: u64,
    pub theoretical_exponent: f64,
    pub source: String,
    /// Decreasing after the smallest `N`, one inversion within 1 SE allowed.
    pub monotone: bool,
    pub faster_than_bound: bool,
    pub verdict: Verdict,
}

impl McReport {
    pub fn within_window(&self, tol: f64) -> bool {
        (self.fitted_slope - self.theoretical_exponent).abs() <= tol
    }

    /// Strictly decreasing over every `N`.
    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    pub fn csv_rows(&self) -> Vec<McRow> {
        self.n_values
            .iter()
            .zip(&self.errors)
            .zip(&self.standard_errors)
            .map(|((&n, &error), &se)| McRow {
                n,
                error,
                se,
                replicates: self.replicates,
            })
            .collect()
    }

    pub fn summary(&self) -> McSummary {
        McSummary {
            target: self.target.clone(),
            metric: self.metric.clone(),
            slope: self.fitted_slope,
            ci: self.slope_ci,
            theory: self.theoretical_exponent,
            verdict: self.verdict,
            monotone: self.monotone,
            faster_than_bound: self.faster_than_bound,
            replicates: self.replicates,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    pub error: f64,
    pub se: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub target: String,
    pub metric: String,
    pub slope: f64,
    pub ci: (f64, f64),
    pub theory: f64,
    pub verdict: Verdict,
    pub monotone: bool,
    pub faster_than_bound: bool,
    pub replicates: usize,
    pub seed: u64,
}

fn check_grid(n_grid: &[usize], replicates: usize) -> AppResult<usize> {
    if n_grid.len() < MIN_GRID_POINTS {
        return Err(AppError::Invalid(format!(
            "need at least {MIN_GRID_POINTS} grid sizes, got {}",
            n_grid.len()
        )));
    }
    if replicates < MIN_REPLICATES {
        return Err(AppError::Invalid(format!(
            "need at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if n_grid.iter().any(|n| !n.is_power_of_two() || *n < 4) {
        return Err(AppError::Invalid("grid sizes must be powers of two >= 4".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AppError::Invalid("grid sizes must be increasing".into()));
    }
    Ok(*n_grid.last().unwrap())
}

/// One draw on the finest grid plus pathwise `int sigma^q` where needed.
struct Draw {
    path: Path,
    sigma_2: f64,
    sigma_p: f64,
}

enum Source {
    Fbm(FbmSampler),
    Perturbed(PerturbedFbmSampler),
    U0(U0Sampler),
    U0Spectral(U0SpectralSampler),
    Spde { config: SimConfig, p: f64, parametrized: bool },
}

impl Source {
    fn u0(params: &KernelParams, n: usize) -> AppResult<Self> {
        Ok(if n <= U0_FACTOR_CAP {
            Source::U0(U0Sampler::new(params, n)?)
        } else {
            Source::U0Spectral(U0SpectralSampler::new(params, n)?)
        })
    }

    fn spde(p: &ExperimentParams, n: usize, seed: u64, parametrized: bool) -> AppResult<Self> {
        let power = even_power(p.alpha).map(f64::from).unwrap_or(f64::NAN);
        Ok(Source::Spde {
            config: p.sim_config(n, seed)?,
            p: power,
            parametrized,
        })
    }

    fn draw(&self, seed: u64, rep: u64) -> Result<Draw, varheat_core::Error> {
        let plain = |path: Path| Draw {
            path,
            sigma_2: 1.0,
            sigma_p: 1.0,
        };
        Ok(match self {
            Source::Fbm(s) => plain(s.sample(seed, rep)),
            Source::Perturbed(s) => plain(s.sample(seed, rep)),
            Source::U0(s) => plain(s.sample(seed, rep)),
            Source::U0Spectral(s) => plain(s.sample(seed, rep)),
            Source::Spde {
                config,
                p,
                parametrized,
            } => {
                let out = if *parametrized && config.theta != 1.0 {
                    solve_parametrized_replicate(config, rep)?
                } else {
                    solve_nonlinear_replicate(config, rep)?
                };
                let sigma_2 = out.sigma_integral(&config.sigma, 2.0);
                let sigma_p = if p.is_finite() {
                    out.sigma_integral(&config.sigma, *p)
                } else {
                    f64::NAN
                };
                Draw {
                    path: out.path,
                    sigma_2,
                    sigma_p,
                }
            }
        })
    }
}

/// Runs `f` on every replicate in parallel; the first failing index aborts.
fn replicates<T: Send>(
    pool: &rayon::ThreadPool,
    count: usize,
    seed: u64,
    f: impl Fn(u64) -> Result<T, varheat_core::Error> + Sync,
) -> AppResult<Vec<T>> {
    let results: Vec<Result<T, varheat_core::Error>> =
        pool.install(|| (0..count as u64).into_par_iter().map(&f).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|source| AppError::Replicate {
                replicate: i as u64,
                seed,
                source,
            })
        })
        .collect()
}

/// Draws indices for bootstrap resampling from a dedicated stream.
struct Resampler {
    stream: NormalStream,
}

impl Resampler {
    fn new(seed: u64) -> Self {
        Self {
            stream: NormalStream::new(seed, 0, Substream::Reserved),
        }
    }

    fn index(&mut self, n: usize) -> usize {
        (self.stream.next_u64() % n as u64) as usize
    }
}

fn log_slope(ns: &[usize], errs: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    ols_slope(&x, &y)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile interval of the slope over replicate resamples; `summary`
/// reduces one column of per-replicate values.
fn bootstrap_slope(
    ns: &[usize],
    table: &[Vec<f64>],
    seed: u64,
    summary: impl Fn(&[f64]) -> f64,
) -> (f64, f64) {
    let reps = table.len();
    let mut rs = Resampler::new(seed);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut col = vec![0.0; reps];
    let mut idx = vec![0usize; reps];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for i in idx.iter_mut() {
            *i = rs.index(reps);
        }
        let errs: Vec<f64> = (0..ns.len())
            .map(|j| {
                for (c, &i) in col.iter_mut().zip(&idx) {
                    *c = table[i][j];
                }
                summary(&col)
            })
            .collect();
        let s = log_slope(ns, &errs);
        if s.is_finite() {
            slopes.push(s);
        }
    }
    if slopes.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    (percentile(&slopes, 0.025), percentile(&slopes, 0.975))
}

/// Decreasing after dropping the smallest `N`, with at most one increase and
/// that one within a standard error.
pub fn monotone_trend(errors: &[f64], se: &[f64]) -> bool {
    let mut inversions = 0;
    for j in 1..errors.len().saturating_sub(1) {
        let (a, b) = (errors[j], errors[j + 1]);
        if b >= a {
            inversions += 1;
            if inversions > 1 || b - a > se[j].max(se[j + 1]) {
                return false;
            }
        }
    }
    true
}

fn verdict(slope: f64, theory: f64, monotone: bool) -> Verdict {
    if !monotone {
        Verdict::NotDecreasing
    } else if slope < theory - SLOPE_TOLERANCE {
        Verdict::FasterThanBound
    } else if slope <= theory + SLOPE_TOLERANCE {
        Verdict::Consistent
    } else {
        Verdict::SlowerThanBound
    }
}

fn build_report(
    target: &str,
    metric: &str,
    spec: &RateSpec,
    ns: &[usize],
    table: Vec<Vec<f64>>,
    seed: u64,
    summary: impl Fn(&[f64]) -> f64,
    spread: impl Fn(&[f64]) -> f64,
) -> AppResult<McReport> {
    let reps = table.len();
    let mut errors = Vec::with_capacity(ns.len());
    let mut ses = Vec::with_capacity(ns.len());
    for j in 0..ns.len() {
        let col: Vec<f64> = table.iter().map(|r| r[j]).collect();
        errors.push(summary(&col));
        ses.push(spread(&col));
    }
    if let Some(j) = errors.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(AppError::Core(varheat_core::Error::NumericalFailure {
            what: "rate experiment",
            detail: format!("error at N = {} is {}", ns[j], errors[j]),
        }));
    }
    let slope = log_slope(ns, &errors);
    let ci = bootstrap_slope(ns, &table, seed, &summary);
    let monotone = monotone_trend(&errors, &ses);
    let theory = spec.theoretical_exponent;
    Ok(McReport {
        target: target.to_string(),
        metric: metric.to_string(),
        n_values: ns.to_vec(),
        errors,
        standard_errors: ses,
        fitted_slope: slope,
        slope_ci: ci,
        replicates: reps,
        seed,
        theoretical_exponent: theory,
        source: spec.source.clone(),
        monotone,
        faster_than_bound: slope < theory - SLOPE_TOLERANCE,
        verdict: verdict(slope, theory, monotone),
    })
}

fn mean_only(xs: &[f64]) -> f64 {
    mean_and_se(xs).0
}

fn se_only(xs: &[f64]) -> f64 {
    mean_and_se(xs).1
}

/// Error curve of one statistic against its pathwise limit.
pub fn run_rate_experiment(
    target: RateTarget,
    params: &ExperimentParams,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> AppResult<McReport> {
    Ok(run_rate_experiments(&[target], params, n_grid, replicates, seed)?.remove(0))
}

/// Several targets on the same draws; they must share a source (the two
/// nonlinear targets, or a single Gaussian one).
pub fn run_rate_experiments(
    targets: &[RateTarget],
    params: &ExperimentParams,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> AppResult<Vec<McReport>> {
    let n_max = check_grid(n_grid, reps)?;
    let first = *targets
        .first()
        .ok_or_else(|| AppError::Invalid("no targets".into()))?;
    if targets.iter().any(|t| t.is_nonlinear() != first.is_nonlinear())
        || (!first.is_nonlinear() && targets.len() > 1)
    {
        return Err(AppError::Invalid("targets do not share a sample source".into()));
    }
    let kernel = KernelParams::new(params.alpha);
    let (source, limits): (Source, Vec<f64>) = match first {
        RateTarget::FbmVn => (Source::Fbm(FbmSampler::new(params.hurst, n_max)?), vec![1.0]),
        RateTarget::PerturbedVn => {
            let spec = PerturbedFbmSpec {
                c0: params.c0,
                hurst: params.hurst,
                perturbation_scale: params.perturbation_scale,
            };
            (
                Source::Perturbed(PerturbedFbmSampler::new(spec, n_max)?),
                vec![params.c0 * params.c0],
            )
        }
        RateTarget::U0Vn => {
            let k = kernel?;
            let c0 = c0_alpha(&k)?;
            (Source::u0(&k, n_max)?, vec![c0 * c0])
        }
        RateTarget::NonlinearVn | RateTarget::NonlinearUn => {
            let k = kernel?;
            let c0 = c0_alpha(&k)?;
            let needs_u = targets.contains(&RateTarget::NonlinearUn);
            let b0 = if needs_u { b0_alpha(&k)? } else { 0.0 };
            // limit factors at unit sigma moments
            let (v, u) = limits_from_constants(params.alpha, params.theta, c0, b0, 1.0, 1.0)?;
            (Source::spde(params, n_max, seed, true)?, vec![v, u])
        }
    };
    let alpha = params.alpha;
    let hurst = params.hurst;
    let p = even_power(alpha).map(f64::from).unwrap_or(f64::NAN);
    let metrics: Vec<ErrorMetric> = targets
        .iter()
        .map(|t| params.metric.unwrap_or_else(|| t.default_metric()))
        .collect();

    // table[target][replicate][n]
    let rows = replicates(&crate::experiments::thread_pool()?, reps, seed, |rep| {
        let d = source.draw(seed, rep)?;
        let mut out = vec![Vec::with_capacity(n_grid.len()); targets.len()];
        for &n in n_grid {
            let path = d.path.subsample(n_max / n)?;
            for (k, t) in targets.iter().enumerate() {
                let e = match t {
                    RateTarget::FbmVn => fbm_normalized_variation(&path, hurst)?.statistic - limits[0],
                    RateTarget::PerturbedVn => {
                        fbm_normalized_variation(&path, hurst)?.statistic - limits[0]
                    }
                    RateTarget::U0Vn => quad_variation_renorm(&path, alpha)?.statistic - limits[0],
                    RateTarget::NonlinearVn => {
                        quad_variation_renorm(&path, alpha)?.statistic - limits[0] * d.sigma_2
                    }
                    RateTarget::NonlinearUn => {
                        if !p.is_finite() {
                            return Err(varheat_core::Error::InvalidArgument(format!(
                                "2 alpha / (alpha - 1) is not an even integer at alpha = {alpha}"
                            )));
                        }
                        power_variation(&path, p)?.statistic - limits[1] * d.sigma_p
                    }
                };
                out[k].push(metrics[k].apply(e));
            }
        }
        Ok(out)
    })?;
    targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let table: Vec<Vec<f64>> = rows.iter().map(|r| r[k].clone()).collect();
            let metric = match metrics[k] {
                ErrorMetric::Absolute => "l1",
                ErrorMetric::Squared => "l2",
            };
            let spec = rate_spec(*t, metrics[k], alpha);
            build_report(t.as_str(), metric, &spec, n_grid, table, seed, mean_only, se_only)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTarget {
    AlphaHat,
    Theta1,
    Theta2,
}

impl EstimatorTarget {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "alpha_hat" | "alpha" => Self::AlphaHat,
            "theta1" => Self::Theta1,
            "theta2" => Self::Theta2,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AlphaHat => "alpha_hat",
            Self::Theta1 => "theta1",
            Self::Theta2 => "theta2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    /// Exact linear solution, `theta = 1`, `sigma = 1`.
    U0,
    /// Solver for `u_theta`.
    Spde,
}

/// Per-replicate estimates on every grid size plus the median error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRun {
    pub report: McReport,
    /// `estimates[replicate][n]`
    pub estimates: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
}

/// Median absolute error of `alpha_hat`, median relative error of the theta
/// estimators, against `N`.
pub fn run_estimator_experiment(
    target: EstimatorTarget,
    process: Process,
    params: &ExperimentParams,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> AppResult<EstimatorRun> {
    if n_grid.is_empty() {
        return Err(AppError::Invalid("empty grid".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid.iter().any(|n| !n.is_power_of_two()) {
        return Err(AppError::Invalid("grid sizes must be increasing powers of two".into()));
    }
    if reps < MIN_REPLICATES {
        return Err(AppError::Invalid(format!(
            "need at least {MIN_REPLICATES} replicates, got {reps}"
        )));
    }
    let n_max = *n_grid.last().unwrap();
    let kernel = KernelParams::new(params.alpha)?;
    if target == EstimatorTarget::Theta2 {
        even_power(params.alpha)?;
    }
    let (source, sigma, truth) = match process {
        Process::U0 => {
            if params.theta != 1.0 {
                return Err(AppError::Invalid("the exact linear process has theta = 1".into()));
            }
            (Source::u0(&kernel, n_max)?, SigmaSpec::ONE, 1.0)
        }
        Process::Spde => (Source::spde(params, n_max, seed, true)?, params.sigma, params.theta),
    };
    let truth = if target == EstimatorTarget::AlphaHat {
        params.alpha
    } else {
        truth
    };
    let c0 = if target == EstimatorTarget::Theta1 { c0_alpha(&kernel)? } else { 0.0 };
    let b0 = if target == EstimatorTarget::Theta2 { b0_alpha(&kernel)? } else { 0.0 };
    let alpha = params.alpha;
    let estimates: Vec<Vec<f64>> = replicates(&thread_pool()?, reps, seed, |rep| {
        let d = source.draw(seed, rep)?;
        n_grid
            .iter()
            .map(|&n| {
                let path = d.path.subsample(n_max / n)?;
                Ok(match target {
                    EstimatorTarget::AlphaHat => estimate_alpha(&path, &sigma)?.estimate,
                    EstimatorTarget::Theta1 => {
                        estimate_theta_quadratic(&path, alpha, &sigma, c0)?.estimate
                    }
                    EstimatorTarget::Theta2 => estimate_theta_power(&path, alpha, &sigma, b0)?.estimate,
                })
            })
            .collect()
    })?;
    let relative = target != EstimatorTarget::AlphaHat;
    let table: Vec<Vec<f64>> = estimates
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    let d = (e - truth).abs();
                    if relative {
                        d / truth
                    } else {
                        d
                    }
                })
                .collect()
        })
        .collect();
    let medians = (0..n_grid.len())
        .map(|j| median(&estimates.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let spec = RateSpec {
        name: target.as_str().to_string(),
        // consistency only; no rate is claimed
        theoretical_exponent: 0.0,
        source: "consistency in probability".to_string(),
    };
    let metric = if relative { "median_relative" } else { "median_absolute" };
    let spread = |xs: &[f64]| bootstrap_median_se(xs, seed);
    let mut report = build_report(target.as_str(), metric, &spec, n_grid, table, seed, median, spread)?;
    report.faster_than_bound = false;
    report.verdict = if report.monotone {
        Verdict::Consistent
    } else {
        Verdict::NotDecreasing
    };
    Ok(EstimatorRun {
        report,
        estimates,
        medians,
    })
}

fn bootstrap_median_se(xs: &[f64], seed: u64) -> f64 {
    let mut rs = Resampler::new(seed ^ 0x5eed);
    let mut buf = vec![0.0; xs.len()];
    let meds: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rs.index(xs.len())];
            }
            median(&buf)
        })
        .collect();
    mean_and_se(&meds).1 * (meds.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop4Params {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: SigmaSpec,
    /// Time of the increment.
    pub t: f64,
    pub deltas: Vec<f64>,
    pub n_space: usize,
    /// Solver step `2^-log2_steps`.
    pub log2_steps: u32,
    pub independent_copy: bool,
}

impl Default for Prop4Params {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            theta: 1.0,
            sigma: SigmaSpec::Affine { a: 1.0, b: 0.5 },
            t: 0.5,
            deltas: (6..=10).map(|k| 2f64.powi(-k)).collect(),
            n_space: 1024,
            log2_steps: 14,
            independent_copy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop4Row {
    pub delta: f64,
    pub t_delta: f64,
    pub mean_sq_gap: f64,
    pub se: f64,
    pub mean_sq_increment: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop4Report {
    pub alpha: f64,
    pub beta: f64,
    /// `4 (alpha - 1) / (2 alpha + 1)`.
    pub bound_exponent: f64,
    pub rows: Vec<Prop4Row>,
    pub max_over_min: f64,
    /// Slope of `log ratio` against `log(1/delta)`.
    pub trend_slope: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// `E|real - surrogate|^2 / delta^{4(alpha-1)/(2alpha+1)}` along a ladder of
/// `delta`, one solve per replicate serving every rung.
pub fn run_prop4_check(p: &Prop4Params, reps: usize, seed: u64) -> AppResult<Prop4Report> {
    if p.deltas.is_empty() {
        return Err(AppError::Invalid("empty delta ladder".into()));
    }
    if reps < 2 {
        return Err(AppError::Invalid("need at least 2 replicates".into()));
    }
    let mut cfg = SimConfig::new(p.alpha, p.theta, p.sigma, 2);
    cfg.n_space = p.n_space;
    cfg.n_time = 1usize << p.log2_steps;
    cfg.seed = seed;
    cfg.method = SolverMethod::Pseudospectral;
    cfg.validate()?;
    let opts = CouplingOptions {
        independent_copy: p.independent_copy,
    };
    let samples = replicates(&thread_pool()?, reps, seed, |rep| {
        coupled_increment_ladder(&cfg, p.t, &p.deltas, rep, opts)
    })?;
    let e = 4.0 * (p.alpha - 1.0) / (2.0 * p.alpha + 1.0);
    let rows: Vec<Prop4Row> = p
        .deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let gaps: Vec<f64> = samples.iter().map(|s| s[k].squared_gap()).collect();
            let incs: Vec<f64> = samples.iter().map(|s| s[k].real_increment.powi(2)).collect();
            let (m, se) = mean_and_se(&gaps);
            let bound = delta.powf(e);
            Prop4Row {
                delta,
                t_delta: samples[0][k].t_delta,
                mean_sq_gap: m,
                se,
                mean_sq_increment: mean_and_se(&incs).0,
                bound,
                ratio: m / bound,
            }
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let x: Vec<f64> = rows.iter().map(|r| -r.delta.ln()).collect();
    let y: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let trend = if rows.len() > 1 { ols_slope(&x, &y) } else { 0.0 };
    Ok(Prop4Report {
        alpha: p.alpha,
        beta: coupling_exponent(p.alpha),
        bound_exponent: e,
        rows,
        max_over_min: max / min,
        trend_slope: trend,
        replicates: reps,
        seed,
    })
}
