//! Pseudo-spectral simulation of
//! `du = -theta (-Laplacian)^{alpha/2} u dt + sigma(u) W(dt, dx)` on the
//! periodized line `[0, 2L)`.
//!
//! Each step multiplies every Fourier mode by its exact semigroup factor
//! `exp(-theta |xi_k|^alpha dt)` and adds the stochastic convolution of the
//! step's noise, with `sigma` frozen at the start of the step. The noise is
//! injected in physical space as independent cell integrals of variance
//! `dt dx`, then transformed; its per-mode variance is scaled to the exact
//! convolution variance `(1 - e^{-2 theta l dt}) / (2 theta l)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::RealFft;
use crate::path::{Path, PathKind};
use crate::rng::{NormalStream, Substream};
use crate::sigma::SigmaSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverMethod {
    /// Linear spectral path when `sigma` is constant and no snapshots are
    /// requested, pseudo-spectral otherwise.
    Auto,
    Pseudospectral,
    /// Exact Ornstein-Uhlenbeck evolution of each lattice mode between
    /// observation times; constant `sigma` only.
    LinearSpectral,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: SigmaSpec,
    /// Observation grid size `N`.
    pub grid_n: usize,
    /// Solver steps over `[0, t_horizon]`.
    pub n_time: usize,
    /// Spatial grid points, a power of two `>= 256`.
    pub n_space: usize,
    pub half_length: f64,
    /// Observation point; the domain centre `L` when `None`.
    pub observe_x: Option<f64>,
    pub seed: u64,
    pub t_horizon: f64,
    /// Add the variance of the modes above the lattice cutoff at observation
    /// times (see [`subgrid_variance`]).
    pub subgrid_correction: bool,
    /// Store the whole field every this many solver steps.
    pub snapshot_every: Option<usize>,
    pub method: SolverMethod,
}

/// Smallest number of solver steps per observation interval.
pub const MIN_SUBSTEPS: usize = 16;

impl SimConfig {
    /// Defaults: `t_horizon = 1`, `L = 5`, `n_space = 1024`, 16 solver steps
    /// per observation interval, subgrid correction on.
    pub fn new(alpha: f64, theta: f64, sigma: SigmaSpec, grid_n: usize) -> Self {
        let t_horizon: f64 = 1.0;
        Self {
            alpha,
            theta,
            sigma,
            grid_n,
            n_time: MIN_SUBSTEPS * grid_n,
            n_space: 1024,
            half_length: 5.0 * t_horizon.powf(1.0 / alpha).max(1.0),
            observe_x: None,
            seed: 0,
            t_horizon,
            subgrid_correction: true,
            snapshot_every: None,
            method: SolverMethod::Auto,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n_time as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_space as f64
    }

    pub fn observation_point(&self) -> f64 {
        self.observe_x.unwrap_or(self.half_length)
    }

    fn observation_index(&self) -> usize {
        let j = (self.observation_point() / self.dx()).round() as i64;
        j.rem_euclid(self.n_space as i64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (1, 2], got {}", self.alpha)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be positive, got {}", self.theta)));
        }
        self.sigma.validate()?;
        if self.grid_n < 2 {
            return Err(Error::invalid("grid_n must be at least 2"));
        }
        if self.n_space < 256 || !self.n_space.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_space must be a power of two >= 256, got {}",
                self.n_space
            )));
        }
        if !(self.t_horizon >= 1.0 && self.t_horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "t_horizon must be at least 1, got {}",
                self.t_horizon
            )));
        }
        let min_l = 5.0 * self.t_horizon.powf(1.0 / self.alpha);
        if !(self.half_length >= min_l * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "half_length {} is below 5 t_horizon^(1/alpha) = {min_l}",
                self.half_length
            )));
        }
        if let Some(x) = self.observe_x {
            if !(x >= 0.0 && x < 2.0 * self.half_length) {
                return Err(Error::invalid(format!("observe_x {x} lies outside [0, 2L)")));
            }
        }
        if self.n_time == 0 {
            return Err(Error::invalid("n_time must be positive"));
        }
        if let Some(0) = self.snapshot_every {
            return Err(Error::invalid("snapshot_every must be positive"));
        }
        if self.method == SolverMethod::LinearSpectral && self.sigma.constant_value().is_none() {
            return Err(Error::invalid("the linear spectral method needs a constant sigma"));
        }
        Ok(())
    }

    /// Solver steps between observations `t_i = i span / N`.
    fn steps_per_observation(&self, span: f64) -> Result<usize> {
        let k = self.n_time as f64 * span / (self.grid_n as f64 * self.t_horizon);
        let r = k.round();
        if (k - r).abs() > 1e-9 * k.max(1.0) || r < MIN_SUBSTEPS as f64 {
            return Err(Error::invalid(format!(
                "observation spacing must be a whole number >= {MIN_SUBSTEPS} of solver steps, \
                 got {k} (n_time = {}, N = {}, span = {span})",
                self.n_time, self.grid_n
            )));
        }
        Ok(r as usize)
    }

    fn use_linear(&self) -> bool {
        match self.method {
            SolverMethod::LinearSpectral => true,
            SolverMethod::Pseudospectral => false,
            SolverMethod::Auto => {
                self.sigma.constant_value().is_some() && self.snapshot_every.is_none()
            }
        }
    }
}

/// `(1/pi) int_K^inf d xi / (2 theta xi^alpha)` with `K = pi / dx`: the
/// stationary variance carried by frequencies above the lattice cutoff.
/// Their correlation time `1/(theta K^alpha)` is far below the observation
/// spacing, so at observation times they act as independent noise scaled by
/// `sigma(u)`.
pub fn subgrid_variance(alpha: f64, theta: f64, dx: f64) -> f64 {
    let k = PI / dx;
    k.powf(1.0 - alpha) / (2.0 * PI * theta * (alpha - 1.0))
}

/// Solver values at the observation point on every solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct FineSeries {
    /// Spacing in the time variable of the returned path.
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FineSeries {
    /// Trapezoid rule for `int sigma(u(s))^q ds` over the series.
    pub fn sigma_integral(&self, sigma: &SigmaSpec, q: f64) -> f64 {
        let f = |u: f64| crate::variations::sigma_power(sigma.eval(u), q);
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mut acc = crate::sum::Neumaier::new();
        acc.add(0.5 * f(self.values[0]));
        for &v in &self.values[1..n - 1] {
            acc.add(f(v));
        }
        acc.add(0.5 * f(self.values[n - 1]));
        acc.total() * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub path: Path,
    /// Present for the pseudo-spectral method.
    pub fine: Option<FineSeries>,
    pub snapshots: Vec<Snapshot>,
}

impl SimOutput {
    /// `int_0^1 sigma(u(s, x))^q ds` of the original process: trapezoid rule on
    /// the fine series, or the exact value for constant `sigma`.
    pub fn sigma_integral(&self, sigma: &SigmaSpec, q: f64) -> f64 {
        if let Some(c) = sigma.constant_value() {
            return crate::variations::sigma_power(c, q);
        }
        match &self.fine {
            Some(f) => f.sigma_integral(sigma, q),
            None => {
                let vals = self.path.values();
                let dt = 1.0 / self.path.grid_n() as f64;
                FineSeries {
                    dt,
                    values: vals.to_vec(),
                }
                .sigma_integral(sigma, q)
            }
        }
    }
}

/// Spectral data of the lattice for one time step.
#[derive(Debug, Clone)]
struct Lattice {
    /// `exp(-theta l dt)`.
    decay: Vec<f64>,
    /// `sqrt(dt/dx) * sqrt((1 - e^{-2 theta l dt}) / (2 theta l dt))`.
    gain: Vec<f64>,
}

impl Lattice {
    fn new(m: usize, half_length: f64, alpha: f64, theta: f64, dt: f64) -> Self {
        let dx = 2.0 * half_length / m as f64;
        // |xi_k|^alpha, k = 0..=m/2
        let symbol: Vec<f64> = (0..=m / 2)
            .map(|k| (PI * k as f64 / half_length).powf(alpha))
            .collect();
        let decay = symbol.iter().map(|&l| (-theta * l * dt).exp()).collect();
        let gain = symbol
            .iter()
            .map(|&l| {
                let r = theta * l * dt;
                let phi2 = if r == 0.0 { 1.0 } else { -(-2.0 * r).exp_m1() / (2.0 * r) };
                (dt / dx * phi2).sqrt()
            })
            .collect();
        Self {
            decay,
            gain,
        }
    }

    #[inline]
    fn advance(&self, state: &mut [Complex64], noise: &[Complex64]) {
        for ((s, n), (e, g)) in state
            .iter_mut()
            .zip(noise)
            .zip(self.decay.iter().zip(&self.gain))
        {
            *s = *s * *e + *n * *g;
        }
    }
}

/// Spectrum of `m` independent standard normals, drawn directly in Fourier space.
fn spectral_white_noise(stream: &mut NormalStream, out: &mut [Complex64]) {
    let m = 2 * (out.len() - 1);
    let full = (m as f64).sqrt();
    let half = (m as f64 / 2.0).sqrt();
    let last = out.len() - 1;
    for (k, o) in out.iter_mut().enumerate() {
        *o = if k == 0 || k == last {
            Complex64::new(full * stream.normal(), 0.0)
        } else {
            let re = stream.normal();
            let im = stream.normal();
            Complex64::new(half * re, half * im)
        };
    }
}

#[inline]
fn apply_sigma(sigma: &SigmaSpec, u: &[f64], z: &mut [f64]) {
    match *sigma {
        SigmaSpec::Constant { c } => {
            if c != 1.0 {
                for v in z.iter_mut() {
                    *v *= c;
                }
            }
        }
        SigmaSpec::Affine { a, b } => {
            for (v, &x) in z.iter_mut().zip(u) {
                *v *= a + b * x;
            }
        }
        SigmaSpec::Sinusoidal { a, b, omega } => {
            for (v, &x) in z.iter_mut().zip(u) {
                *v *= a + b * (omega * x).sin();
            }
        }
    }
}

fn non_finite(step: usize) -> Error {
    Error::numerical("spde solver", format!("non-finite field value at step {step}"))
}

/// Field state of the pseudo-spectral scheme.
struct Pseudospectral {
    lattice: Lattice,
    fft: RealFft,
    u: Vec<f64>,
    u_hat: Vec<Complex64>,
    z: Vec<f64>,
    noise_hat: Vec<Complex64>,
    stream: NormalStream,
    sigma: SigmaSpec,
}

impl Pseudospectral {
    fn new(cfg: &SimConfig, theta: f64, sigma: SigmaSpec, replicate: u64) -> Result<Self> {
        let m = cfg.n_space;
        Ok(Self {
            lattice: Lattice::new(m, cfg.half_length, cfg.alpha, theta, cfg.dt()),
            fft: RealFft::new(m)?,
            u: vec![0.0; m],
            u_hat: vec![Complex64::new(0.0, 0.0); m / 2 + 1],
            z: vec![0.0; m],
            noise_hat: vec![Complex64::new(0.0, 0.0); m / 2 + 1],
            stream: NormalStream::new(cfg.seed, replicate, Substream::Primary),
            sigma,
        })
    }

    fn step(&mut self, index: usize) -> Result<()> {
        self.stream.fill_normal(&mut self.z);
        apply_sigma(&self.sigma, &self.u, &mut self.z);
        self.fft.forward(&self.z, &mut self.noise_hat);
        self.lattice.advance(&mut self.u_hat, &self.noise_hat);
        self.fft.inverse(&self.u_hat, &mut self.u);
        if !self.u[0].is_finite() || !self.u[self.u.len() / 2].is_finite() {
            return Err(non_finite(index));
        }
        Ok(())
    }
}

fn check_field(u: &[f64], step: usize) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(non_finite(step))
    }
}

/// Path of `u(t_i, x)` on `t_i = i/N`, replicate 0.
pub fn solve_nonlinear(config: &SimConfig) -> Result<SimOutput> {
    solve_nonlinear_replicate(config, 0)
}

pub fn solve_nonlinear_replicate(config: &SimConfig, replicate: u64) -> Result<SimOutput> {
    config.validate()?;
    run(config, config.theta, config.sigma, 1.0, replicate)
}

/// `u_theta(t_i, x)` through the time change `v(t, x) = u_theta(t / theta, x)`:
/// `v` solves the equation with drift 1 and coefficient `theta^{-1/2} sigma`,
/// and is read at `theta t_i`.
pub fn solve_parametrized(config: &SimConfig) -> Result<SimOutput> {
    solve_parametrized_replicate(config, 0)
}

pub fn solve_parametrized_replicate(config: &SimConfig, replicate: u64) -> Result<SimOutput> {
    config.validate()?;
    let theta = config.theta;
    if config.t_horizon < theta * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "t_horizon {} must be at least theta = {theta}",
            config.t_horizon
        )));
    }
    if theta == 1.0 {
        return run(config, 1.0, config.sigma, 1.0, replicate);
    }
    let sigma_hat = config.sigma.scaled(theta.powf(-0.5));
    run(config, 1.0, sigma_hat, theta, replicate)
}

/// Simulates with drift `theta` and coefficient `sigma`, observing at
/// `span * i / N`; the returned path lives on `[0, 1]` in the original clock.
fn run(
    cfg: &SimConfig,
    theta: f64,
    sigma: SigmaSpec,
    span: f64,
    replicate: u64,
) -> Result<SimOutput> {
    let per_obs = cfg.steps_per_observation(span)?;
    if cfg.use_linear() {
        return run_linear(cfg, theta, sigma, span, replicate);
    }
    let n = cfg.grid_n;
    let total = per_obs * n;
    let obs = cfg.observation_index();
    let mut solver = Pseudospectral::new(cfg, theta, sigma, replicate)?;
    let mut fine = Vec::with_capacity(total + 1);
    fine.push(0.0);
    let mut snapshots = Vec::new();
    if cfg.snapshot_every.is_some() {
        snapshots.push(Snapshot {
            step: 0,
            time: 0.0,
            field: solver.u.clone(),
        });
    }
    for k in 1..=total {
        solver.step(k)?;
        fine.push(solver.u[obs]);
        if let Some(every) = cfg.snapshot_every {
            if k % every == 0 {
                check_field(&solver.u, k)?;
                snapshots.push(Snapshot {
                    step: k,
                    time: k as f64 * cfg.dt(),
                    field: solver.u.clone(),
                });
            }
        }
    }
    let mut values: Vec<f64> = fine.iter().step_by(per_obs).copied().collect();
    if cfg.subgrid_correction {
        add_subgrid(cfg, theta, &sigma, replicate, &mut values);
    }
    let path = Path::new(values, cfg.observation_point(), PathKind::SpdeNumeric)?;
    Ok(SimOutput {
        path,
        fine: Some(FineSeries {
            dt: 1.0 / total as f64,
            values: fine,
        }),
        snapshots,
    })
}

fn add_subgrid(cfg: &SimConfig, theta: f64, sigma: &SigmaSpec, replicate: u64, values: &mut [f64]) {
    let sd = subgrid_variance(cfg.alpha, theta, cfg.dx()).sqrt();
    let mut s = NormalStream::new(cfg.seed, replicate, Substream::Auxiliary);
    for v in values.iter_mut().skip(1) {
        *v += sigma.eval(*v) * sd * s.normal();
    }
}

/// Constant `sigma`: the value at a lattice point is
/// `(1/M) [a_0 + (-1)^j a_{M/2} + 2 sum_k Re(u_k e^{i xi_k x_j})]` and each
/// term is an independent Ornstein-Uhlenbeck process, advanced exactly between
/// observation times.
fn run_linear(
    cfg: &SimConfig,
    theta: f64,
    sigma: SigmaSpec,
    span: f64,
    replicate: u64,
) -> Result<SimOutput> {
    let c = sigma
        .constant_value()
        .ok_or_else(|| Error::invalid("the linear spectral method needs a constant sigma"))?;
    let n = cfg.grid_n;
    let m = cfg.n_space;
    let l = cfg.half_length;
    let h = span / n as f64;
    let modes: Vec<(f64, f64, f64)> = (0..=m / 2)
        .map(|k| {
            let lam = theta * (PI * k as f64 / l).powf(cfg.alpha);
            let weight = if k == 0 || k == m / 2 { 1.0 / (2.0 * l) } else { 1.0 / l };
            let decay = (-lam * h).exp();
            let var = if lam == 0.0 { h } else { -(-2.0 * lam * h).exp_m1() / (2.0 * lam) };
            (decay, var.sqrt(), c * weight.sqrt())
        })
        .collect();
    let mut stream = NormalStream::new(cfg.seed, replicate, Substream::Primary);
    let mut state = vec![0.0f64; modes.len()];
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    for i in 1..=n {
        let mut acc = 0.0;
        for (x, &(decay, sd, w)) in state.iter_mut().zip(&modes) {
            *x = decay * *x + sd * stream.normal();
            acc += w * *x;
        }
        if !acc.is_finite() {
            return Err(non_finite(i));
        }
        values.push(acc);
    }
    if cfg.subgrid_correction {
        add_subgrid(cfg, theta, &sigma, replicate, &mut values);
    }
    let path = Path::new(values, cfg.observation_point(), PathKind::SpdeNumeric)?;
    Ok(SimOutput {
        path,
        fine: None,
        snapshots: Vec::new(),
    })
}

/// Exact covariance of the lattice solution with `sigma = 1` at the
/// observation point (no subgrid correction):
/// `(1/2L) sum_k (e^{-l_k|t-s|} - e^{-l_k(t+s)}) / (2 l_k)` over all `M` modes.
pub fn lattice_covariance(cfg: &SimConfig, s: f64, t: f64) -> f64 {
    let m = cfg.n_space;
    let l = cfg.half_length;
    let mut acc = crate::sum::Neumaier::new();
    for k in 0..=m / 2 {
        let lam = cfg.theta * (PI * k as f64 / l).powf(cfg.alpha);
        let w = if k == 0 || k == m / 2 { 1.0 / (2.0 * l) } else { 1.0 / l };
        let c = if lam == 0.0 {
            s.min(t)
        } else {
            ((-lam * (t - s).abs()).exp() - (-lam * (t + s)).exp()) / (2.0 * lam)
        };
        acc.add(w * c);
    }
    acc.total()
}

/// One draw of the coupling construction at a fixed observation point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoupledIncrementSample {
    /// `u(t + delta, x) - u(t, x)`
    pub real_increment: f64,
    /// `sigma(u(t(delta), x)) * tilde-Delta u_0(t, delta)`
    pub surrogate: f64,
    pub delta: f64,
    /// `t - delta^beta`, rounded to the solver grid.
    pub t_delta: f64,
}

impl CoupledIncrementSample {
    pub fn squared_gap(&self) -> f64 {
        (self.real_increment - self.surrogate).powi(2)
    }
}

/// `beta = 2 alpha / (2 alpha + 1)`.
pub fn coupling_exponent(alpha: f64) -> f64 {
    2.0 * alpha / (2.0 * alpha + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Drive the linear increment by an independent noise on `[0, t(delta)]`.
    /// With `false` and `sigma = 1`, the surrogate equals the real increment.
    pub independent_copy: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            independent_copy: true,
        }
    }
}

pub fn coupled_increment(
    config: &SimConfig,
    t: f64,
    delta: f64,
    replicate: u64,
) -> Result<CoupledIncrementSample> {
    Ok(coupled_increment_ladder(config, t, &[delta], replicate, CouplingOptions::default())?[0])
}

/// The coupling construction for several `delta` on one realization of the
/// noise pair. One nonlinear solve serves every rung; each rung has its own
/// linear field, driven by the copy before its `t(delta)` and by the primary
/// noise afterwards.
pub fn coupled_increment_ladder(
    config: &SimConfig,
    t: f64,
    deltas: &[f64],
    replicate: u64,
    opts: CouplingOptions,
) -> Result<Vec<CoupledIncrementSample>> {
    config.validate()?;
    let dt = config.dt();
    let to_steps = |x: f64, what: &str| -> Result<usize> {
        let k = x / dt;
        let r = k.round();
        if (k - r).abs() > 1e-7 * k.max(1.0) {
            return Err(Error::invalid(format!(
                "{what} = {x} is not a multiple of the solver step {dt}"
            )));
        }
        Ok(r as usize)
    };
    if !(t > 0.0) {
        return Err(Error::invalid("t must be positive"));
    }
    let beta = coupling_exponent(config.alpha);
    let t_step = to_steps(t, "t")?;
    struct Rung {
        fork: usize,
        end: usize,
        delta: f64,
        z: Vec<Complex64>,
        at_t: f64,
        sigma_at_fork: f64,
        real_at_t: f64,
    }
    let mut rungs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if !(d > 0.0) {
            return Err(Error::invalid(format!("delta must be positive, got {d}")));
        }
        let lag = d.powf(beta);
        if lag >= t {
            return Err(Error::invalid(format!(
                "delta^beta = {lag} must be below t = {t}"
            )));
        }
        let d_steps = to_steps(d, "delta")?;
        if d_steps == 0 {
            return Err(Error::invalid("delta is below the solver step"));
        }
        let fork = ((t - lag) / dt).round() as usize;
        let fork = fork.min(t_step - 1);
        let end = t_step + d_steps;
        if end as f64 * dt > config.t_horizon * (1.0 + 1e-12) {
            return Err(Error::invalid("t + delta exceeds t_horizon"));
        }
        rungs.push(Rung {
            fork,
            end,
            delta: d,
            z: Vec::new(),
            at_t: 0.0,
            sigma_at_fork: 0.0,
            real_at_t: 0.0,
        });
    }
    let last_end = rungs.iter().map(|r| r.end).max().unwrap_or(0);
    let last_fork = rungs.iter().map(|r| r.fork).max().unwrap_or(0);

    let m = config.n_space;
    let obs = config.observation_index();
    let mut solver = Pseudospectral::new(config, config.theta, config.sigma, replicate)?;
    let mut copy_stream = NormalStream::new(config.seed, replicate, Substream::Copy);
    let mut w_hat = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    let mut plain_hat = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    let mut copy_hat = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    let mut phys = vec![0.0; m];
    let mut raw = vec![0.0; m];
    let sigma = config.sigma;

    let mut real_end = vec![0.0; rungs.len()];
    let mut sur_end = vec![0.0; rungs.len()];
    for step in 0..=last_end {
        if step > 0 {
            solver.stream.fill_normal(&mut raw);
            solver.z.copy_from_slice(&raw);
            apply_sigma(&sigma, &solver.u, &mut solver.z);
            solver.fft.forward(&solver.z, &mut solver.noise_hat);
            let forked = rungs.iter().any(|r| r.fork < step && step <= r.end);
            if forked || !opts.independent_copy {
                if matches!(sigma, SigmaSpec::Constant { c } if c == 1.0) {
                    plain_hat.copy_from_slice(&solver.noise_hat);
                } else {
                    solver.fft.forward(&raw, &mut plain_hat);
                }
            }
            if step <= last_fork {
                if opts.independent_copy {
                    spectral_white_noise(&mut copy_stream, &mut copy_hat);
                    solver.lattice.advance(&mut w_hat, &copy_hat);
                } else {
                    solver.lattice.advance(&mut w_hat, &plain_hat);
                }
            }
            for r in rungs.iter_mut() {
                if r.fork < step && step <= r.end {
                    solver.lattice.advance(&mut r.z, &plain_hat);
                }
            }
            solver.lattice.advance(&mut solver.u_hat, &solver.noise_hat);
            solver.fft.inverse(&solver.u_hat, &mut solver.u);
            if !solver.u[obs].is_finite() {
                return Err(non_finite(step));
            }
        }
        for (i, r) in rungs.iter_mut().enumerate() {
            if step == r.fork {
                r.z = w_hat.clone();
                r.sigma_at_fork = sigma.eval(solver.u[obs]);
            }
            if step == t_step || step == r.end {
                solver.fft.inverse(&r.z, &mut phys);
                if step == t_step {
                    r.at_t = phys[obs];
                    r.real_at_t = solver.u[obs];
                } else {
                    sur_end[i] = r.sigma_at_fork * (phys[obs] - r.at_t);
                    real_end[i] = solver.u[obs] - r.real_at_t;
                }
            }
        }
    }
    Ok(rungs
        .iter()
        .enumerate()
        .map(|(i, r)| CoupledIncrementSample {
            real_increment: real_end[i],
            surrogate: sur_end[i],
            delta: r.delta,
            t_delta: r.fork as f64 * dt,
        })
        .collect())
}

/// Empirical temporal Hölder exponent from dyadic-lag increments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HolderReport {
    /// Half the log-log slope of mean squared increments against the lag.
    pub exponent: f64,
    /// `(alpha - 1) / (2 alpha)`.
    pub theoretical: f64,
    pub lags: Vec<f64>,
    pub mean_square: Vec<f64>,
}

pub fn holder_diagnostics(path: &Path, alpha: f64) -> Result<HolderReport> {
    holder_diagnostics_many(core::slice::from_ref(path), alpha)
}

/// Pools increments of several paths on the same grid. Lags run over
/// `2^j` grid steps up to `N/16`.
pub fn holder_diagnostics_many(paths: &[Path], alpha: f64) -> Result<HolderReport> {
    let first = paths
        .first()
        .ok_or_else(|| Error::invalid("no paths supplied"))?;
    let n = first.grid_n();
    if n < 256 {
        return Err(Error::invalid(format!("need N >= 256, got {n}")));
    }
    if paths.iter().any(|p| p.grid_n() != n) {
        return Err(Error::invalid("paths must share one grid"));
    }
    let span = first.t_end - first.t_start;
    let mut lags = Vec::new();
    let mut ms = Vec::new();
    let mut lag = 1;
    while lag <= n / 16 {
        let mut acc = crate::sum::Neumaier::new();
        let mut count = 0usize;
        for p in paths {
            let v = p.values();
            for i in 0..=n - lag {
                let d = v[i + lag] - v[i];
                acc.add(d * d);
                count += 1;
            }
        }
        lags.push(lag as f64 * span / n as f64);
        ms.push(acc.total() / count as f64);
        lag *= 2;
    }
    if ms.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::numerical(
            "holder_diagnostics",
            "constant path: increments vanish at some lag",
        ));
    }
    let xs: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
    let slope = crate::variations::ols_slope(&xs, &ys);
    Ok(HolderReport {
        exponent: slope / 2.0,
        theoretical: (alpha - 1.0) / (2.0 * alpha),
        lags,
        mean_square: ms,
    })
}
