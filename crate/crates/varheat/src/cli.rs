//! Command-line parsing, configuration precedence and command execution.
//!
//! Values come from flags first, then the `--config` TOML file, then
//! defaults. The resolved [`RunConfig`] is what runs and what the manifest
//! records, so `rerun` repeats a command without the original file.

use std::ffi::OsString;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use varheat_core::estimators::{estimate_alpha, estimate_theta_power, estimate_theta_quadratic};
use varheat_core::gaussian::{
    b0_alpha, c0_alpha_report, even_power, FbmSampler, PerturbedFbmSampler, PerturbedFbmSpec,
    U0Sampler, U0SpectralSampler, U0_FACTOR_CAP,
};
use varheat_core::kernel::{c_alpha, kernel_l2_time_integral, kernel_property_check, m_alpha};
use varheat_core::path::Path;
use varheat_core::spde::{solve_nonlinear_replicate, solve_parametrized_replicate, SimOutput};
use varheat_core::variations::{fbm_normalized_variation, power_variation, quad_variation_renorm};
use varheat_core::{KernelParams, SigmaSpec};

use crate::error::{AppError, AppResult};
use crate::experiments::{
    run_estimator_experiment, run_prop4_check, run_rate_experiment, ErrorMetric,
    EstimatorTarget, ExperimentParams, Process, Prop4Params, RateTarget,
};
use crate::io::{self, PathMeta, SnapshotSidecar, VariationRow};
use crate::manifest::{config_hash, Manifest, Versions, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "varheat", version, about = "Simulation and estimation for the fractional stochastic heat equation")]
pub struct Cli {
    /// Base seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format of path and variation outputs.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file with defaults; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalization, symmetry, scaling and bound checks of the Green kernel.
    KernelCheck(KernelCheckArgs),
    /// Sample a path at one spatial point.
    Sample(SampleArgs),
    /// Variation statistic of a stored or simulated path.
    Variation(VariationArgs),
    /// Estimate alpha or theta from a stored or simulated path.
    Estimate(EstimateArgs),
    /// Monte Carlo error curve and fitted rate.
    Rate(RateArgs),
    /// Coupled-increment ratios along a delta ladder.
    Prop4Check(Prop4Args),
    /// Repeat a run from its manifest.
    Rerun(RerunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelCheck(_) => "kernel-check",
            Command::Sample(_) => "sample",
            Command::Variation(_) => "variation",
            Command::Estimate(_) => "estimate",
            Command::Rate(_) => "rate",
            Command::Prop4Check(_) => "prop4-check",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct KernelCheckArgs {
    /// Anomality exponent in (1, 2].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Time at which the kernel is checked.
    #[arg(long)]
    pub t: Option<f64>,
    /// Absolute tolerance of the kernel evaluations.
    #[arg(long)]
    pub abs_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Fbm,
    Perturbed,
    U0,
    Spde,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct ProcessArgs {
    /// Process to sample.
    #[arg(long, value_enum)]
    pub process: Option<ProcessKind>,
    /// Grid size N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Hurst index of fbm and perturbed paths.
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Anomality exponent in (1, 2].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Drift multiplier.
    #[arg(long)]
    pub theta: Option<f64>,
    /// `C`, `const:C`, `affine:A,B` or `sin:A,B,OMEGA`.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Multiplier of the fBm in perturbed paths.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Scale of the perturbation in perturbed paths.
    #[arg(long)]
    pub perturbation_scale: Option<f64>,
    /// Spatial lattice size, a power of two.
    #[arg(long)]
    pub n_space: Option<usize>,
    /// Solver steps per observation interval.
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Half length L of the periodic domain [0, 2L].
    #[arg(long)]
    pub half_length: Option<f64>,
    /// Observation point; the domain centre when omitted.
    #[arg(long)]
    pub observe_x: Option<f64>,
    /// Add the variance of the modes above the lattice cutoff.
    #[arg(long)]
    pub subgrid: Option<bool>,
    /// Replicate index within the seed's streams.
    #[arg(long)]
    pub replicate: Option<u64>,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    /// Store the whole field every this many solver steps.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationKindArg {
    Quad,
    Power,
    Fbm,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct VariationArgs {
    /// Statistic to compute.
    #[arg(long, value_enum)]
    pub kind: Option<VariationKindArg>,
    /// Path file written by `sample`.
    #[arg(long, conflicts_with = "simulate")]
    pub input: Option<PathBuf>,
    /// Simulate the path from the process flags instead.
    #[arg(long)]
    pub simulate: Option<bool>,
    /// Power for `--kind power`; `2 alpha / (alpha - 1)` when omitted.
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTargetArg {
    Alpha,
    Theta1,
    Theta2,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Parameter to estimate.
    #[arg(long, value_enum)]
    pub target: Option<EstimateTargetArg>,
    /// Path file written by `sample`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct RateArgs {
    /// fbm_vn, perturbed_vn, u0_vn, nonlinear_vn, nonlinear_un, alpha_hat, theta1 or theta2.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma separated grid sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Replicates per grid size.
    #[arg(long)]
    pub reps: Option<usize>,
    /// l1 or l2.
    #[arg(long)]
    pub metric: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
pub struct Prop4Args {
    /// Anomality exponent in (1, 2].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Drift multiplier.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Diffusion coefficient, same syntax as for `sample`.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Observation time t.
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma separated delta values.
    #[arg(long, value_delimiter = ',')]
    pub delta_ladder: Option<Vec<f64>>,
    /// Spatial lattice size, a power of two.
    #[arg(long)]
    pub n_space: Option<usize>,
    /// Solver step `2^-log2_steps`.
    #[arg(long)]
    pub log2_steps: Option<u32>,
    /// Replicates.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Drive the copy with fresh noise after the fork time.
    #[arg(long)]
    pub independent_copy: Option<bool>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RerunArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Fully resolved process recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub process: ProcessKind,
    pub n: usize,
    pub hurst: f64,
    pub alpha: f64,
    pub theta: f64,
    pub sigma: SigmaSpec,
    pub c0: f64,
    pub perturbation_scale: f64,
    pub n_space: usize,
    pub substeps: usize,
    pub half_length: Option<f64>,
    pub observe_x: Option<f64>,
    pub subgrid: bool,
    pub replicate: u64,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunSpec {
    KernelCheck {
        alpha: f64,
        t: f64,
        abs_tol: f64,
    },
    Sample {
        process: ProcessConfig,
    },
    Variation {
        kind: VariationKindArg,
        input: Option<PathBuf>,
        process: Option<ProcessConfig>,
        alpha: f64,
        hurst: f64,
        p: Option<f64>,
    },
    Estimate {
        target: EstimateTargetArg,
        input: Option<PathBuf>,
        process: Option<ProcessConfig>,
        alpha: f64,
        sigma: SigmaSpec,
    },
    Rate {
        target: String,
        n_grid: Vec<usize>,
        reps: usize,
        process: Process,
        params: ExperimentParams,
    },
    Prop4Check {
        params: Prop4Params,
        reps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub spec: RunSpec,
}

pub const DEFAULT_OUT: &str = "varheat-run";

/// `C`, `const:C`, `affine:A,B` or `sin:A,B,OMEGA`.
pub fn parse_sigma(s: &str) -> AppResult<SigmaSpec> {
    let bad = || AppError::Invalid(format!("cannot parse sigma {s:?}"));
    let nums = |body: &str| -> AppResult<Vec<f64>> {
        body.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    let spec = match s.split_once(':') {
        None => SigmaSpec::Constant { c: s.trim().parse().map_err(|_| bad())? },
        Some((kind, body)) => {
            let v = nums(body)?;
            match (kind.trim(), v.as_slice()) {
                ("const", [c]) => SigmaSpec::Constant { c: *c },
                ("affine", [a, b]) => SigmaSpec::Affine { a: *a, b: *b },
                ("sin", [a, b, omega]) => SigmaSpec::Sinusoidal {
                    a: *a,
                    b: *b,
                    omega: *omega,
                },
                _ => return Err(bad()),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Fills `None` fields of `flags` from `file`; unknown keys in `file` are errors.
fn overlay<T: Serialize + for<'de> Deserialize<'de>>(
    flags: &T,
    file: Option<&toml::Value>,
    section: &str,
) -> AppResult<T> {
    let mut base = serde_json::to_value(flags).expect("arguments serialize");
    if let Some(file) = file {
        let file = serde_json::to_value(file)
            .map_err(|e| AppError::Invalid(format!("config section [{section}]: {e}")))?;
        let (Some(obj), Some(fobj)) = (base.as_object_mut(), file.as_object()) else {
            return Err(AppError::Invalid(format!("config section [{section}] must be a table")));
        };
        for (k, v) in fobj {
            match obj.get_mut(k) {
                None => {
                    return Err(AppError::Invalid(format!(
                        "unknown key {k:?} in config section [{section}]"
                    )))
                }
                Some(slot) if slot.is_null() => *slot = v.clone(),
                Some(_) => {}
            }
        }
    }
    serde_json::from_value(base)
        .map_err(|e| AppError::Invalid(format!("config section [{section}]: {e}")))
}

fn check_alpha(alpha: f64) -> AppResult<()> {
    KernelParams::new(alpha)?;
    Ok(())
}

fn resolve_process(a: &ProcessArgs, default: ProcessKind, snapshot_every: Option<usize>) -> AppResult<ProcessConfig> {
    let process = a.process.unwrap_or(default);
    let c = ProcessConfig {
        process,
        n: a.n.unwrap_or(1024),
        hurst: a.hurst.unwrap_or(0.25),
        alpha: a.alpha.unwrap_or(2.0),
        theta: a.theta.unwrap_or(1.0),
        sigma: parse_sigma(a.sigma.as_deref().unwrap_or("1"))?,
        c0: a.c0.unwrap_or(1.0),
        perturbation_scale: a.perturbation_scale.unwrap_or(1.0),
        n_space: a.n_space.unwrap_or(1024),
        substeps: a.substeps.unwrap_or(16),
        half_length: a.half_length,
        observe_x: a.observe_x,
        subgrid: a.subgrid.unwrap_or(true),
        replicate: a.replicate.unwrap_or(0),
        snapshot_every,
    };
    if c.n < 2 {
        return Err(AppError::Invalid("--n must be at least 2".into()));
    }
    match process {
        ProcessKind::Fbm => {
            if !(c.hurst > 0.0 && c.hurst < 1.0) {
                return Err(AppError::Invalid("--hurst must lie in (0, 1)".into()));
            }
        }
        ProcessKind::Perturbed => PerturbedFbmSpec {
            c0: c.c0,
            hurst: c.hurst,
            perturbation_scale: c.perturbation_scale,
        }
        .validate()?,
        ProcessKind::U0 => {
            check_alpha(c.alpha)?;
            if c.theta != 1.0 || c.sigma != SigmaSpec::ONE {
                return Err(AppError::Invalid(
                    "the exact linear process has theta = 1 and sigma = 1; use --process spde".into(),
                ));
            }
        }
        ProcessKind::Spde => {
            sim_config(&c, 0)?;
        }
    }
    Ok(c)
}

fn experiment_params(c: &ProcessConfig) -> ExperimentParams {
    ExperimentParams {
        alpha: c.alpha,
        hurst: c.hurst,
        theta: c.theta,
        sigma: c.sigma,
        c0: c.c0,
        perturbation_scale: c.perturbation_scale,
        n_space: c.n_space,
        half_length: c.half_length,
        substeps: c.substeps,
        subgrid_correction: c.subgrid,
        metric: None,
    }
}

fn sim_config(c: &ProcessConfig, seed: u64) -> AppResult<varheat_core::spde::SimConfig> {
    let mut cfg = experiment_params(c).sim_config(c.n, seed)?;
    cfg.observe_x = c.observe_x;
    cfg.snapshot_every = c.snapshot_every;
    cfg.validate()?;
    Ok(cfg)
}

fn absolute(p: &FsPath) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn resolve(cli: &Cli) -> AppResult<RunConfig> {
    let file: Option<toml::Value> = match &cli.config {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
            Some(toml::from_str(&text).map_err(|e| AppError::format(p, e.to_string()))?)
        }
    };
    let top = |k: &str| file.as_ref().and_then(|f| f.get(k));
    let seed = match (cli.seed, top("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v
            .as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| AppError::Invalid("config seed must be a nonnegative integer".into()))?,
        (None, None) => 0,
    };
    let format = match (cli.format, top("format")) {
        (Some(f), _) => f,
        (None, Some(v)) => match v.as_str() {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            _ => return Err(AppError::Invalid("config format must be \"csv\" or \"json\"".into())),
        },
        (None, None) => Format::Csv,
    };
    let name = cli.command.name();
    let section = top(name);
    let spec = match &cli.command {
        Command::KernelCheck(a) => {
            let a = overlay(a, section, name)?;
            let alpha = a
                .alpha
                .ok_or_else(|| AppError::Invalid("--alpha is required".into()))?;
            let t = a.t.unwrap_or(1.0);
            let abs_tol = a.abs_tol.unwrap_or(KernelParams::DEFAULT_ABS_TOL);
            KernelParams::with_tol(alpha, abs_tol)?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(AppError::Invalid("--t must be positive".into()));
            }
            RunSpec::KernelCheck { alpha, t, abs_tol }
        }
        Command::Sample(a) => {
            let a = overlay(a, section, name)?;
            RunSpec::Sample {
                process: resolve_process(&a.process, ProcessKind::U0, a.snapshot_every)?,
            }
        }
        Command::Variation(a) => {
            let a = overlay(a, section, name)?;
            let kind = a.kind.unwrap_or(VariationKindArg::Quad);
            let simulate = a.simulate.unwrap_or(false);
            if a.input.is_none() && !simulate {
                return Err(AppError::Invalid("give --input FILE or --simulate true".into()));
            }
            if a.input.is_some() && simulate {
                return Err(AppError::Invalid("--input and --simulate exclude each other".into()));
            }
            let alpha = a.process.alpha.unwrap_or(2.0);
            let hurst = a.process.hurst.unwrap_or(0.25);
            match kind {
                VariationKindArg::Quad => check_alpha(alpha)?,
                VariationKindArg::Power => {
                    if a.p.is_none() {
                        check_alpha(alpha)?;
                        even_power(alpha)?;
                    }
                }
                VariationKindArg::Fbm => {
                    if !(hurst > 0.0 && hurst < 1.0) {
                        return Err(AppError::Invalid("--hurst must lie in (0, 1)".into()));
                    }
                }
            }
            if let Some(p) = a.p {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(AppError::Invalid("--p must be positive".into()));
                }
            }
            let input = a.input.as_deref().map(absolute);
            if let Some(f) = &input {
                if !f.is_file() {
                    return Err(AppError::io(f, std::io::ErrorKind::NotFound.into()));
                }
            }
            RunSpec::Variation {
                kind,
                process: if simulate {
                    Some(resolve_process(&a.process, ProcessKind::U0, None)?)
                } else {
                    None
                },
                input,
                alpha,
                hurst,
                p: a.p,
            }
        }
        Command::Estimate(a) => {
            let a = overlay(a, section, name)?;
            let target = a.target.unwrap_or(EstimateTargetArg::Alpha);
            let alpha = a.process.alpha.unwrap_or(2.0);
            check_alpha(alpha)?;
            if target == EstimateTargetArg::Theta2 {
                even_power(alpha)?;
            }
            let sigma = parse_sigma(a.process.sigma.as_deref().unwrap_or("1"))?;
            let input = a.input.as_deref().map(absolute);
            if let Some(f) = &input {
                if !f.is_file() {
                    return Err(AppError::io(f, std::io::ErrorKind::NotFound.into()));
                }
            }
            let process = if input.is_none() {
                Some(resolve_process(&a.process, ProcessKind::U0, None)?)
            } else {
                None
            };
            RunSpec::Estimate {
                target,
                input,
                process,
                alpha,
                sigma,
            }
        }
        Command::Rate(a) => {
            let a = overlay(a, section, name)?;
            let target = a
                .target
                .clone()
                .ok_or_else(|| AppError::Invalid("--target is required".into()))?;
            if RateTarget::parse(&target).is_none() && EstimatorTarget::parse(&target).is_none() {
                return Err(AppError::Invalid(format!("unknown rate target {target:?}")));
            }
            let n_grid = a.n_grid.clone().unwrap_or_else(|| vec![256, 1024, 4096, 16384]);
            let reps = a.reps.unwrap_or(100);
            let kind = a.process.process.unwrap_or(ProcessKind::Spde);
            let pc = resolve_process(
                &ProcessArgs {
                    process: Some(ProcessKind::Fbm),
                    ..a.process.clone()
                },
                ProcessKind::Fbm,
                None,
            )?;
            let mut params = experiment_params(&pc);
            params.metric = match a.metric.as_deref() {
                None => None,
                Some("l1") => Some(ErrorMetric::Absolute),
                Some("l2") => Some(ErrorMetric::Squared),
                Some(m) => return Err(AppError::Invalid(format!("unknown metric {m:?}"))),
            };
            check_alpha(params.alpha)?;
            let process = match kind {
                ProcessKind::U0 => Process::U0,
                _ => Process::Spde,
            };
            RunSpec::Rate {
                target,
                n_grid,
                reps,
                process,
                params,
            }
        }
        Command::Prop4Check(a) => {
            let a = overlay(a, section, name)?;
            let d = Prop4Params::default();
            let params = Prop4Params {
                alpha: a.alpha.ok_or_else(|| AppError::Invalid("--alpha is required".into()))?,
                theta: a.theta.unwrap_or(d.theta),
                sigma: match &a.sigma {
                    Some(s) => parse_sigma(s)?,
                    None => d.sigma,
                },
                t: a.t.unwrap_or(d.t),
                deltas: a.delta_ladder.clone().unwrap_or(d.deltas),
                n_space: a.n_space.unwrap_or(d.n_space),
                log2_steps: a.log2_steps.unwrap_or(d.log2_steps),
                independent_copy: a.independent_copy.unwrap_or(d.independent_copy),
            };
            check_alpha(params.alpha)?;
            if params.log2_steps > 24 {
                return Err(AppError::Invalid("--log2-steps must be at most 24".into()));
            }
            RunSpec::Prop4Check {
                params,
                reps: a.reps.unwrap_or(500),
            }
        }
        Command::Rerun(_) => unreachable!("rerun is handled before resolution"),
    };
    Ok(RunConfig { seed, format, spec })
}

fn sample_process(c: &ProcessConfig, seed: u64) -> AppResult<(Path, Option<SimOutput>)> {
    let rep = c.replicate;
    Ok(match c.process {
        ProcessKind::Fbm => (FbmSampler::new(c.hurst, c.n)?.sample(seed, rep), None),
        ProcessKind::Perturbed => {
            let spec = PerturbedFbmSpec {
                c0: c.c0,
                hurst: c.hurst,
                perturbation_scale: c.perturbation_scale,
            };
            (PerturbedFbmSampler::new(spec, c.n)?.sample(seed, rep), None)
        }
        ProcessKind::U0 => {
            let k = KernelParams::new(c.alpha)?;
            let p = if c.n <= U0_FACTOR_CAP {
                U0Sampler::new(&k, c.n)?.sample(seed, rep)
            } else {
                U0SpectralSampler::new(&k, c.n)?.sample(seed, rep)
            };
            (p, None)
        }
        ProcessKind::Spde => {
            let cfg = sim_config(c, seed)?;
            let out = if c.theta != 1.0 {
                solve_parametrized_replicate(&cfg, rep)?
            } else {
                solve_nonlinear_replicate(&cfg, rep)?
            };
            (out.path.clone(), Some(out))
        }
    })
}

/// Writes the command's artifacts into `out`; returns their file names.
pub fn execute(cfg: &RunConfig, out: &FsPath) -> AppResult<Vec<String>> {
    let seed = cfg.seed;
    let mut outputs = Vec::new();
    let mut emit = |name: &str| -> PathBuf {
        outputs.push(name.to_string());
        out.join(name)
    };
    match &cfg.spec {
        RunSpec::KernelCheck { alpha, t, abs_tol } => {
            let params = KernelParams::with_tol(*alpha, *abs_tol)?;
            let report = kernel_property_check(&params, *t)?;
            let c0 = c0_alpha_report(&params, 1.0)?;
            let b0 = if even_power(*alpha).is_ok() {
                Some(b0_alpha(&params)?)
            } else {
                None
            };
            let summary = serde_json::json!({
                "report": report,
                "positive": report.positive(),
                "c_alpha": c_alpha(&params)?,
                "m_alpha": m_alpha(&params)?,
                "l2_time_integral_t_t": kernel_l2_time_integral(&params, *t, *t)?,
                "c0": c0.c0,
                "c0_relative_change": c0.relative_change,
                "b0": b0,
            });
            io::write_json(&emit("kernel_check.json"), &summary)?;
            println!(
                "alpha = {alpha}, t = {t}: normalization error {:.3e}, symmetry error {:.3e}, scaling error {:.3e}",
                report.normalization_error, report.symmetry_error, report.scaling_error
            );
            if let Some(e) = report.closed_form_error {
                println!("closed-form error {e:.3e}");
            }
            println!("sandwich ratio range [{:.4}, {:.4}]", report.sandwich_min, report.sandwich_max);
        }
        RunSpec::Sample { process } => {
            let (path, sim) = sample_process(process, seed)?;
            let meta = PathMeta::of(&path, seed, serde_json::to_value(process).expect("serializable"));
            match cfg.format {
                Format::Csv => io::write_path_csv(&emit("path.csv"), &path, &meta)?,
                Format::Json => io::write_path_json(&emit("path.json"), &path, &meta)?,
            }
            if let Some(sim) = sim.filter(|s| !s.snapshots.is_empty()) {
                let sc = sim_config(process, seed)?;
                let sidecar = SnapshotSidecar {
                    rows: sim.snapshots.len(),
                    cols: sc.n_space,
                    dx: sc.dx(),
                    dt: sc.dt(),
                    alpha: sc.alpha,
                    theta: sc.theta,
                    seed,
                    steps: sim.snapshots.iter().map(|s| s.step).collect(),
                    times: sim.snapshots.iter().map(|s| s.time).collect(),
                    dtype: "f64-le".into(),
                    layout: "row-major".into(),
                };
                let bin = emit("snapshots.bin");
                io::write_snapshots(&bin, &emit("snapshots.json"), &sim.snapshots, sidecar)?;
            }
            println!("sampled {} path with N = {}", path.kind.as_str(), path.grid_n());
        }
        RunSpec::Variation {
            kind,
            input,
            process,
            alpha,
            hurst,
            p,
        } => {
            let path = match (input, process) {
                (Some(f), _) => io::read_path(f)?.0,
                (None, Some(pc)) => sample_process(pc, seed)?.0,
                (None, None) => return Err(AppError::Invalid("no path source".into())),
            };
            let v = match kind {
                VariationKindArg::Quad => quad_variation_renorm(&path, *alpha)?,
                VariationKindArg::Power => {
                    let p = match p {
                        Some(p) => *p,
                        None => f64::from(even_power(*alpha)?),
                    };
                    power_variation(&path, p)?
                }
                VariationKindArg::Fbm => fbm_normalized_variation(&path, *hurst)?,
            };
            let row = VariationRow::from(&v);
            match cfg.format {
                Format::Csv => io::write_csv(&emit("variation.csv"), &[row])?,
                Format::Json => io::write_json(&emit("variation.json"), &v)?,
            }
            println!("{} statistic = {}", v.kind.as_str(), v.statistic);
        }
        RunSpec::Estimate {
            target,
            input,
            process,
            alpha,
            sigma,
        } => {
            let path = match (input, process) {
                (Some(f), _) => io::read_path(f)?.0,
                (None, Some(pc)) => sample_process(pc, seed)?.0,
                (None, None) => return Err(AppError::Invalid("no path source".into())),
            };
            let params = KernelParams::new(*alpha)?;
            let est = match target {
                EstimateTargetArg::Alpha => estimate_alpha(&path, sigma)?,
                EstimateTargetArg::Theta1 => {
                    let c0 = c0_alpha_report(&params, 1.0)?.c0;
                    estimate_theta_quadratic(&path, *alpha, sigma, c0)?
                }
                EstimateTargetArg::Theta2 => {
                    estimate_theta_power(&path, *alpha, sigma, b0_alpha(&params)?)?
                }
            };
            io::write_json(&emit("estimate.json"), &est)?;
            println!("estimate = {}", est.estimate);
        }
        RunSpec::Rate {
            target,
            n_grid,
            reps,
            process,
            params,
        } => {
            let report = if let Some(t) = RateTarget::parse(target) {
                run_rate_experiment(t, params, n_grid, *reps, seed)?
            } else {
                let t = EstimatorTarget::parse(target)
                    .ok_or_else(|| AppError::Invalid(format!("unknown rate target {target:?}")))?;
                let run = run_estimator_experiment(t, *process, params, n_grid, *reps, seed)?;
                io::write_json(&emit("estimates.json"), &run)?;
                run.report
            };
            io::write_csv(&emit("rate.csv"), &report.csv_rows())?;
            io::write_json(&emit("rate_summary.json"), &report.summary())?;
            io::write_json(&emit("rate_report.json"), &report)?;
            println!(
                "{}: slope {:.3} (ci [{:.3}, {:.3}]), theory {:.3}, verdict {:?}",
                report.target,
                report.fitted_slope,
                report.slope_ci.0,
                report.slope_ci.1,
                report.theoretical_exponent,
                report.verdict
            );
        }
        RunSpec::Prop4Check { params, reps } => {
            let report = run_prop4_check(params, *reps, seed)?;
            io::write_csv(&emit("prop4.csv"), &report.rows)?;
            io::write_json(&emit("prop4.json"), &report)?;
            println!(
                "alpha = {}: ratio max/min {:.3}, trend slope {:.3}",
                report.alpha, report.max_over_min, report.trend_slope
            );
        }
    }
    Ok(outputs)
}

fn run_and_record(cfg: &RunConfig, out: &FsPath, command: &str, args: Vec<String>) -> AppResult<()> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let outputs = execute(cfg, out)?;
    let config = serde_json::to_value(cfg).expect("configs serialize");
    let manifest = Manifest {
        command: command.to_string(),
        args,
        seed: cfg.seed,
        spec_hash: config_hash(&config),
        started_at,
        duration_s: clock.elapsed().as_secs_f64(),
        outputs,
        config,
        versions: Versions::default(),
    };
    manifest.write(out)
}

fn dispatch(cli: Cli, args: Vec<String>) -> AppResult<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Command::Rerun(r) = &cli.command {
        let m = Manifest::read(&r.manifest)?;
        let cfg: RunConfig = serde_json::from_value(m.config.clone())
            .map_err(|e| AppError::format(&r.manifest, e.to_string()))?;
        if config_hash(&m.config) != m.spec_hash {
            return Err(AppError::format(&r.manifest, "spec_hash does not match config"));
        }
        if cli.out.is_none() {
            return Err(AppError::Invalid("rerun needs --out".into()));
        }
        let manifest_dir = r.manifest.parent().map(absolute);
        if manifest_dir.is_some() && manifest_dir == Some(absolute(&out)) {
            return Err(AppError::Invalid("rerun --out must differ from the original run directory".into()));
        }
        return run_and_record(&cfg, &out, &m.command, m.args);
    }
    let cfg = resolve(&cli)?;
    run_and_record(&cfg, &out, cli.command.name(), args)
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let args = argv
        .iter()
        .skip(1)
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Files a manifest lists, excluding the manifest itself.
pub fn manifest_outputs(dir: &FsPath) -> AppResult<Vec<PathBuf>> {
    let m = Manifest::read(&dir.join(MANIFEST_FILE))?;
    Ok(m.outputs.iter().map(|o| dir.join(o)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_strings() {
        assert_eq!(parse_sigma("1").unwrap(), SigmaSpec::ONE);
        assert_eq!(parse_sigma("const:2").unwrap(), SigmaSpec::Constant { c: 2.0 });
        assert_eq!(parse_sigma("affine:1,0.5").unwrap(), SigmaSpec::Affine { a: 1.0, b: 0.5 });
        assert_eq!(
            parse_sigma("sin:1, 0.5, 1").unwrap(),
            SigmaSpec::Sinusoidal { a: 1.0, b: 0.5, omega: 1.0 }
        );
        assert!(parse_sigma("sin:1,2").is_err());
        assert!(parse_sigma("cubic:1").is_err());
        assert!(parse_sigma("nan").is_err());
    }

    #[test]
    fn flags_beat_config_file() {
        let file: toml::Value = toml::from_str("n = 64\nalpha = 1.5\n").unwrap();
        let flags = SampleArgs {
            process: ProcessArgs {
                n: Some(128),
                ..Default::default()
            },
            snapshot_every: None,
        };
        let merged = overlay(&flags, Some(&file), "sample").unwrap();
        assert_eq!(merged.process.n, Some(128));
        assert_eq!(merged.process.alpha, Some(1.5));
        let bad: toml::Value = toml::from_str("nn = 64\n").unwrap();
        assert!(overlay(&flags, Some(&bad), "sample").is_err());
    }

    #[test]
    fn unknown_flag_exits_with_usage_error() {
        assert_eq!(run(["varheat", "kernel-check", "--bogus", "1"]), 2);
        assert_eq!(run(["varheat", "frobnicate"]), 2);
        assert_eq!(run(["varheat", "--help"]), 0);
    }

    #[test]
    fn invalid_values_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let o = out.to_str().unwrap();
        assert_eq!(run(["varheat", "--out", o, "kernel-check", "--alpha", "2.5"]), 2);
        assert_eq!(run(["varheat", "--out", o, "sample", "--process", "u0", "--alpha", "0.5"]), 2);
        assert_eq!(run(["varheat", "--out", o, "estimate", "--target", "theta2", "--alpha", "1.9"]), 2);
    }
}
