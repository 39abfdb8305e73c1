//! Exact Gaussian machinery: fractional Brownian motion, perturbed fBm, and
//! the law of the linear solution `u_0(t, x)` at a fixed point.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::kernel::{m_alpha, KernelParams};
use crate::linalg::{Cholesky, CholeskyOptions, DenseMatrix};
use crate::path::{Path, PathKind};
use crate::quad::GaussLegendre;
use crate::rng::{NormalStream, Substream};
use crate::special::gaussian_even_moment;
use crate::sum::Neumaier;

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("Hurst index must lie in (0, 1), got {h}")))
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("grid size N must be at least 2, got {n}")))
    }
}

/// `(t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::invalid(format!("times must be nonnegative, got s={s}, t={t}")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Correlation of unit-lag fBm increments at lag `v`:
/// `(|v+1|^{2H} + |v-1|^{2H} - 2|v|^{2H}) / 2`.
pub fn rho(hurst: f64, v: i64) -> f64 {
    let h2 = 2.0 * hurst;
    let v = v.unsigned_abs() as f64;
    0.5 * ((v + 1.0).powf(h2) + (v - 1.0).abs().powf(h2) - 2.0 * v.powf(h2))
}

/// `E[N^{2H-1} (B_{t_{i+1}} - B_{t_i})^2 - 1/N]^2`, evaluated from the
/// covariance as twice the squared variance of the normalized increment.
pub fn normalized_increment_square_variance(hurst: f64, n: usize, i: usize) -> Result<f64> {
    check_hurst(hurst)?;
    let dt = 1.0 / n as f64;
    let (s, t) = (i as f64 * dt, (i + 1) as f64 * dt);
    let var = fbm_covariance(hurst, t, t)? + fbm_covariance(hurst, s, s)?
        - 2.0 * fbm_covariance(hurst, s, t)?;
    let v = (n as f64).powf(2.0 * hurst - 1.0) * var;
    Ok(2.0 * v * v)
}

fn cumulative_path(increments: &[f64], scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(0.0);
    let mut acc = Neumaier::new();
    for &x in increments {
        acc.add(x);
        out.push(scale * acc.total());
    }
    out
}

#[derive(Debug, Clone)]
enum FbmMethod {
    /// Square roots of `eigenvalues / m` of the circulant embedding.
    Circulant { sqrt_eig: Vec<f64>, plan: FftPlan },
    /// Factor of the fractional Gaussian noise covariance.
    Factor(Cholesky),
}

/// Exact sampler of `(B^H_{t_0}, ..., B^H_{t_N})` on `t_i = i/N`.
///
/// The stationary unit-lag increments are drawn by circulant embedding
/// (Davies-Harte); if the embedding has eigenvalues below
/// `-1e-10 * max`, the increment covariance is factorized instead.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: f64,
    n: usize,
    method: FbmMethod,
}

impl FbmSampler {
    pub fn new(hurst: f64, n: usize) -> Result<Self> {
        check_hurst(hurst)?;
        check_grid(n)?;
        let m = (2 * n).next_power_of_two();
        let plan = FftPlan::new(m)?;
        let half = m / 2;
        let mut row: Vec<Complex64> = (0..m)
            .map(|k| {
                let lag = if k <= half { k } else { m - k };
                Complex64::new(rho(hurst, lag as i64), 0.0)
            })
            .collect();
        plan.forward(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        let method = if min >= -1e-10 * max {
            let sqrt_eig = row
                .iter()
                .map(|c| (c.re.max(0.0) / m as f64).sqrt())
                .collect();
            FbmMethod::Circulant { sqrt_eig, plan }
        } else {
            let a = DenseMatrix::from_fn(n, |i, j| rho(hurst, i as i64 - j as i64));
            FbmMethod::Factor(Cholesky::factor(a, CholeskyOptions::default())?)
        };
        Ok(Self { hurst, n, method })
    }

    /// Forces the factorization path (used to cross-check the embedding).
    pub fn new_factorized(hurst: f64, n: usize) -> Result<Self> {
        check_hurst(hurst)?;
        check_grid(n)?;
        let a = DenseMatrix::from_fn(n, |i, j| rho(hurst, i as i64 - j as i64));
        Ok(Self {
            hurst,
            n,
            method: FbmMethod::Factor(Cholesky::factor(a, CholeskyOptions::default())?),
        })
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, FbmMethod::Circulant { .. })
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Path values from an explicit normal stream.
    pub fn sample_values(&self, stream: &mut NormalStream) -> Vec<f64> {
        let n = self.n;
        let noise: Vec<f64> = match &self.method {
            FbmMethod::Circulant { sqrt_eig, plan } => {
                let mut w: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re = stream.normal();
                        let im = stream.normal();
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                plan.forward(&mut w);
                w[..n].iter().map(|c| c.re).collect()
            }
            FbmMethod::Factor(ch) => {
                let mut z = vec![0.0; n];
                stream.fill_normal(&mut z);
                let mut out = vec![0.0; n];
                ch.mul_lower(&z, &mut out);
                out
            }
        };
        cumulative_path(&noise, (n as f64).powf(-self.hurst))
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Path {
        let mut s = NormalStream::new(seed, replicate, Substream::Primary);
        Path::new(self.sample_values(&mut s), 0.0, PathKind::Fbm)
            .expect("grid size checked at construction")
    }
}

/// One exact fBm path, replicate 0 of `seed`.
pub fn sample_fbm(hurst: f64, grid_n: usize, seed: u64) -> Result<Path> {
    Ok(FbmSampler::new(hurst, grid_n)?.sample(seed, 0))
}

/// `X_t = c0 B^H_t + c_Y t^H Z` with `Z ~ N(0, 1)` independent of `B^H`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbedFbmSpec {
    pub c0: f64,
    pub hurst: f64,
    pub perturbation_scale: f64,
}

impl PerturbedFbmSpec {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::invalid(format!("c0 must be positive, got {}", self.c0)));
        }
        if !self.perturbation_scale.is_finite() {
            return Err(Error::invalid("perturbation scale must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedFbmSampler {
    spec: PerturbedFbmSpec,
    fbm: FbmSampler,
}

impl PerturbedFbmSampler {
    pub fn new(spec: PerturbedFbmSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            fbm: FbmSampler::new(spec.hurst, n)?,
        })
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Path {
        let mut s = NormalStream::new(seed, replicate, Substream::Primary);
        let mut v = self.fbm.sample_values(&mut s);
        let z = NormalStream::new(seed, replicate, Substream::Auxiliary).normal();
        let n = self.fbm.grid_n() as f64;
        let h = self.spec.hurst;
        for (i, x) in v.iter_mut().enumerate() {
            let t = i as f64 / n;
            *x = self.spec.c0 * *x + self.spec.perturbation_scale * t.powf(h) * z;
        }
        Path::new(v, 0.0, PathKind::Perturbed).expect("grid size checked at construction")
    }
}

pub fn sample_perturbed_fbm(spec: PerturbedFbmSpec, grid_n: usize, seed: u64) -> Result<Path> {
    Ok(PerturbedFbmSampler::new(spec, grid_n)?.sample(seed, 0))
}

/// Time covariance of `u_0(., x)`:
/// `(2 pi)^{-1} int (e^{-|t-s||xi|^alpha} - e^{-(t+s)|xi|^alpha}) / (2|xi|^alpha) d xi`.
///
/// Writing the integrand as an integral of `e^{-r|xi|^alpha}` over
/// `r in [|t-s|, t+s]` gives `K ((t+s)^g - |t-s|^g)` with `g = 1 - 1/alpha`,
/// `K = m_alpha / (4 pi g)` and `m_alpha = int e^{-|eta|^alpha} d eta`, the
/// latter by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct U0Covariance {
    alpha: f64,
    gamma: f64,
    k: f64,
}

impl U0Covariance {
    pub fn new(params: &KernelParams) -> Result<Self> {
        params.validate()?;
        let gamma = params.gamma_exponent();
        let k = m_alpha(params)? / (4.0 * PI * gamma);
        Ok(Self {
            alpha: params.alpha,
            gamma,
            k,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1 - 1/alpha`.
    pub fn exponent(&self) -> f64 {
        self.gamma
    }

    /// The prefactor `K`; the squared constant `C_{0,alpha}^2` equals `2K`.
    pub fn prefactor(&self) -> f64 {
        self.k
    }

    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0) {
            return Err(Error::invalid(format!("times must be nonnegative, got s={s}, t={t}")));
        }
        Ok(self.k * ((t + s).powf(self.gamma) - (t - s).abs().powf(self.gamma)))
    }

    /// `E(u_0(t + delta) - u_0(t))^2`.
    pub fn increment_variance(&self, t: f64, delta: f64) -> Result<f64> {
        if !(t >= 0.0 && delta >= 0.0) {
            return Err(Error::invalid("need t >= 0 and delta >= 0"));
        }
        let g = self.gamma;
        let x = 2.0 * t;
        let second_diff = (x + 2.0 * delta).powf(g) - 2.0 * (x + delta).powf(g) + x.powf(g);
        Ok(self.k * (2.0 * delta.powf(g) + second_diff))
    }
}

pub fn u0_time_covariance(params: &KernelParams, s: f64, t: f64) -> Result<f64> {
    U0Covariance::new(params)?.cov(s, t)
}

pub fn u0_increment_variance(params: &KernelParams, t: f64, delta: f64) -> Result<f64> {
    U0Covariance::new(params)?.increment_variance(t, delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceBuilder {
    Fbm { hurst: f64 },
    U0 { alpha: f64 },
}

/// Covariance of a process on `t_i = i/N`, `i = 0..=N`.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub entries: DenseMatrix,
    pub builder: CovarianceBuilder,
}

impl CovarianceMatrix {
    pub fn fbm(hurst: f64, n: usize) -> Result<Self> {
        check_hurst(hurst)?;
        check_grid(n)?;
        let pw = power_table(2.0 * hurst, n);
        let scale = (n as f64).powf(-2.0 * hurst);
        let entries = DenseMatrix::from_fn(n + 1, |i, j| {
            0.5 * scale * (pw[i] + pw[j] - pw[i.abs_diff(j)])
        });
        Ok(Self {
            entries,
            builder: CovarianceBuilder::Fbm { hurst },
        })
    }

    pub fn u0(params: &KernelParams, n: usize) -> Result<Self> {
        check_grid(n)?;
        let c = U0Covariance::new(params)?;
        let pw = power_table(c.gamma, 2 * n);
        let scale = c.k * (n as f64).powf(-c.gamma);
        let entries = DenseMatrix::from_fn(n + 1, |i, j| scale * (pw[i + j] - pw[i.abs_diff(j)]));
        Ok(Self {
            entries,
            builder: CovarianceBuilder::U0 {
                alpha: params.alpha,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }
}

/// `k^e` for `k = 0..=n`.
fn power_table(e: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| (k as f64).powf(e)).collect()
}

/// Default largest grid for dense factorization of the `u_0` covariance.
pub const U0_FACTOR_CAP: usize = 8192;

/// Exact sampler of `u_0(t_i, x)` by Cholesky factorization of the grid
/// covariance. The zero first row is dropped before factorizing.
#[derive(Debug, Clone)]
pub struct U0Sampler {
    alpha: f64,
    n: usize,
    chol: Cholesky,
}

impl U0Sampler {
    pub fn new(params: &KernelParams, n: usize) -> Result<Self> {
        Self::with_cap(params, n, U0_FACTOR_CAP)
    }

    pub fn with_cap(params: &KernelParams, n: usize, cap: usize) -> Result<Self> {
        check_grid(n)?;
        if n > cap {
            return Err(Error::invalid(format!(
                "N = {n} exceeds the factorization cap {cap}; use the spectral sampler"
            )));
        }
        let c = U0Covariance::new(params)?;
        let pw = power_table(c.gamma, 2 * n);
        let scale = c.k * (n as f64).powf(-c.gamma);
        let a = DenseMatrix::from_fn(n, |i, j| scale * (pw[i + j + 2] - pw[i.abs_diff(j)]));
        let chol = Cholesky::factor(a, CholeskyOptions::default())?;
        Ok(Self {
            alpha: params.alpha,
            n,
            chol,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_pivot(&self) -> f64 {
        self.chol.min_pivot()
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Path {
        let mut z = vec![0.0; self.n];
        NormalStream::new(seed, replicate, Substream::Primary).fill_normal(&mut z);
        let mut v = vec![0.0; self.n + 1];
        self.chol.mul_lower(&z, &mut v[1..]);
        Path::new(v, 0.0, PathKind::U0Exact).expect("grid size checked at construction")
    }

    /// Replicates `first..first + count`, identical to repeated [`U0Sampler::sample`].
    pub fn sample_batch(&self, seed: u64, first: u64, count: usize) -> Vec<Path> {
        let zs: Vec<Vec<f64>> = (0..count)
            .map(|r| {
                let mut z = vec![0.0; self.n];
                NormalStream::new(seed, first + r as u64, Substream::Primary).fill_normal(&mut z);
                z
            })
            .collect();
        let mut outs = vec![vec![0.0; self.n]; count];
        self.chol.mul_lower_batch(&zs, &mut outs);
        outs.into_iter()
            .map(|o| {
                let mut v = Vec::with_capacity(self.n + 1);
                v.push(0.0);
                v.extend_from_slice(&o);
                Path::new(v, 0.0, PathKind::U0Exact).expect("grid size checked at construction")
            })
            .collect()
    }
}

/// `u_0` sample by exact factorization; `N` must not exceed [`U0_FACTOR_CAP`].
pub fn sample_u0_path(params: &KernelParams, grid_n: usize, seed: u64) -> Result<Path> {
    Ok(U0Sampler::new(params, grid_n)?.sample(seed, 0))
}

/// Sampler of `u_0(t_i, x)` for grids beyond the factorization cap.
///
/// The covariance is a mixture of Ornstein-Uhlenbeck covariances,
/// `cov(s, t) = int (e^{-l|t-s|} - e^{-l(t+s)}) / (2l) mu(dl)` with
/// `mu(dl) = l^{1/alpha - 1} / (pi alpha) dl`, so `u_0` is a weighted sum of
/// independent OU processes started at zero. The mixture is discretized by
/// Gauss-Legendre panels in `log l`; rates below `l_lo` are treated as a
/// Brownian mode and rates above `l_hi` (decorrelated within one grid step)
/// as independent noise of the matching variance. Each mode is advanced
/// exactly between grid times.
#[derive(Debug, Clone)]
pub struct U0SpectralSampler {
    n: usize,
    /// `(decay per step, innovation sd, sqrt weight)` per OU mode.
    modes: Vec<(f64, f64, f64)>,
    brownian_sd: f64,
    nugget_sd: f64,
}

impl U0SpectralSampler {
    pub fn new(params: &KernelParams, n: usize) -> Result<Self> {
        params.validate()?;
        check_grid(n)?;
        let a = params.alpha;
        let dt = 1.0 / n as f64;
        let l_lo: f64 = 1e-8;
        let l_hi = 40.0 / dt;
        let rule = GaussLegendre::new(8);
        let (s_lo, s_hi) = (l_lo.ln(), l_hi.ln());
        let panels = ((s_hi - s_lo) / 0.5).ceil() as usize;
        let width = (s_hi - s_lo) / panels as f64;
        let mut modes = Vec::with_capacity(panels * rule.nodes.len());
        for p in 0..panels {
            let lo = s_lo + width * p as f64;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = lo + 0.5 * width * (1.0 + x);
                let l = s.exp();
                // mu(dl) = l^{1/alpha} / (pi alpha) ds
                let weight = 0.5 * width * w * l.powf(1.0 / a) / (PI * a);
                let decay = (-l * dt).exp();
                let sd = (-(-2.0 * l * dt).exp_m1() / (2.0 * l)).sqrt();
                modes.push((decay, sd, weight.sqrt()));
            }
        }
        let brownian_weight = l_lo.powf(1.0 / a) / PI;
        let nugget_var = l_hi.powf(1.0 / a - 1.0) / (2.0 * PI * a * (1.0 - 1.0 / a));
        Ok(Self {
            n,
            modes,
            brownian_sd: (brownian_weight * dt).sqrt(),
            nugget_sd: nugget_var.sqrt(),
        })
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Covariance implied by the discretized mixture, for validation.
    pub fn implied_covariance(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        if i == 0 {
            return 0.0;
        }
        let mut c = 0.0;
        for &(decay, sd, w) in &self.modes {
            // var of X at step i times decay^{j-i}
            let var_i = sd * sd * (1.0 - decay.powi(2 * i as i32)) / (1.0 - decay * decay).max(1e-300);
            let var_i = if decay * decay >= 1.0 - 1e-300 { sd * sd * i as f64 } else { var_i };
            c += w * w * var_i * decay.powi((j - i) as i32);
        }
        c += self.brownian_sd * self.brownian_sd * i as f64;
        if i == j {
            c += self.nugget_sd * self.nugget_sd;
        }
        c
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> Path {
        let mut s = NormalStream::new(seed, replicate, Substream::Primary);
        let mut state = vec![0.0f64; self.modes.len()];
        let mut brown = 0.0;
        let mut v = Vec::with_capacity(self.n + 1);
        v.push(0.0);
        for _ in 0..self.n {
            let mut acc = 0.0;
            for (x, &(decay, sd, w)) in state.iter_mut().zip(&self.modes) {
                *x = decay * *x + sd * s.normal();
                acc += w * *x;
            }
            brown += self.brownian_sd * s.normal();
            acc += brown + self.nugget_sd * s.normal();
            v.push(acc);
        }
        Path::new(v, 0.0, PathKind::U0Exact).expect("grid size checked at construction")
    }
}

/// `C_{0,alpha}` together with the extrapolation ladder that produced it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct C0Report {
    pub c0: f64,
    pub base_point: f64,
    /// `(delta, delta^{-2H} E(u_0(t + delta) - u_0(t))^2, extrapolated)`.
    pub ladder: Vec<(f64, f64, f64)>,
    pub relative_change: f64,
}

/// Ladder exponents `k` of `delta = 2^{-k}`.
const C0_LADDER: core::ops::RangeInclusive<i32> = 6..=14;

/// `C_{0,alpha} = sqrt(lim delta^{-2H} E(u_0(t+delta) - u_0(t))^2)` at `t = 1`.
pub fn c0_alpha(params: &KernelParams) -> Result<f64> {
    Ok(c0_alpha_report(params, 1.0)?.c0)
}

/// Richardson extrapolation on the normalized variogram. The leading
/// correction is of order `delta^{1 + 1/alpha}`; the estimate must change by
/// at most `1e-3` (relative) between the last two rungs.
pub fn c0_alpha_report(params: &KernelParams, base_point: f64) -> Result<C0Report> {
    params.validate()?;
    if !(base_point > 0.0 && base_point.is_finite()) {
        return Err(Error::invalid("base point must be positive"));
    }
    let cov = U0Covariance::new(params)?;
    let g = cov.exponent();
    let order = 1.0 + 1.0 / params.alpha;
    let f = 2f64.powf(order);
    let t = base_point;
    let mut ladder = Vec::new();
    let mut prev: Option<f64> = None;
    for k in C0_LADDER {
        let d = 2f64.powi(-k);
        let var = cov.cov(t + d, t + d)? + cov.cov(t, t)? - 2.0 * cov.cov(t, t + d)?;
        let normalized = var / d.powf(g);
        let extrapolated = match prev {
            Some(p) => (f * normalized - p) / (f - 1.0),
            None => normalized,
        };
        ladder.push((d, normalized, extrapolated));
        prev = Some(normalized);
    }
    let n = ladder.len();
    let (last, before) = (ladder[n - 1].2, ladder[n - 2].2);
    let relative_change = ((last - before) / last).abs();
    if !(last > 0.0) || !(relative_change <= 1e-3) {
        return Err(Error::numerical(
            "c0_alpha",
            format!("extrapolation unstable: last rungs {before:.10e}, {last:.10e}"),
        ));
    }
    Ok(C0Report {
        c0: last.sqrt(),
        base_point,
        ladder,
        relative_change,
    })
}

/// The even exponent `2 alpha / (alpha - 1)`, if it is an even integer.
pub fn even_power(alpha: f64) -> Result<u32> {
    let p = 2.0 * alpha / (alpha - 1.0);
    let r = p.round();
    if (p - r).abs() <= 1e-9 && r >= 2.0 && (r as u64).is_multiple_of(2) {
        Ok(r as u32)
    } else {
        Err(Error::invalid(format!(
            "2 alpha / (alpha - 1) = {p} is not an even integer (alpha = {alpha})"
        )))
    }
}

/// `B_{0,alpha} = C_{0,alpha}^p E|Z|^p` with `p = 2 alpha / (alpha - 1)` even.
pub fn b0_alpha(params: &KernelParams) -> Result<f64> {
    params.validate()?;
    let p = even_power(params.alpha)?;
    Ok(c0_alpha(params)?.powi(p as i32) * gaussian_even_moment(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(a: f64) -> KernelParams {
        KernelParams::new(a).unwrap()
    }

    #[test]
    fn fbm_covariance_examples() {
        assert_eq!(fbm_covariance(0.5, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(fbm_covariance(0.3, 0.0, 0.7).unwrap(), 0.0);
        assert_relative_eq!(fbm_covariance(0.25, 1.0, 1.0).unwrap(), 1.0);
        assert!(fbm_covariance(1.0, 1.0, 1.0).is_err());
        assert!(fbm_covariance(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(0.37, 0), 1.0);
        assert!(rho(0.5, 3).abs() < 1e-15);
        assert_relative_eq!(rho(0.25, 1), (2f64.sqrt() - 2.0) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn rho_square_summable_below_three_quarters() {
        for a in [1.25, 1.5, 2.0] {
            let h = (a - 1.0) / (2.0 * a);
            let partial = |m: i64| (1..=m).map(|v| rho(h, v).powi(2)).sum::<f64>();
            let (s1, s2) = (partial(5_000), partial(10_000));
            assert!(s2.is_finite() && (s2 - s1) < 1e-6 * s2.max(1e-3));
        }
    }

    #[test]
    fn lemma1_identity_is_exact() {
        for h in [0.25, 0.5, 0.75] {
            for n in [64usize, 256, 4096] {
                for i in [0, n / 2, n - 1] {
                    let v = normalized_increment_square_variance(h, n, i).unwrap();
                    let exact = 2.0 / (n as f64 * n as f64);
                    assert!((v - exact).abs() < 1e-12 * exact.max(1.0), "{h} {n} {i}");
                }
            }
        }
    }

    #[test]
    fn circulant_matches_factorized_covariance() {
        // both samplers are exact; compare the empirical lag-1 increment correlation
        let n = 64;
        let h = 0.25;
        let circ = FbmSampler::new(h, n).unwrap();
        assert!(circ.uses_circulant());
        let fact = FbmSampler::new_factorized(h, n).unwrap();
        for sampler in [&circ, &fact] {
            let reps = 4000;
            let (mut c, mut v) = (0.0, 0.0);
            for r in 0..reps {
                let path = sampler.sample(11, r);
                let d: Vec<f64> = path.increments().collect();
                for k in 0..n - 1 {
                    c += d[k] * d[k + 1];
                    v += d[k] * d[k];
                }
            }
            let corr = c / v;
            assert!((corr - rho(h, 1)).abs() < 0.02, "{corr}");
        }
    }

    #[test]
    fn fbm_paths_start_at_zero_and_are_deterministic() {
        let a = sample_fbm(0.3, 100, 5).unwrap();
        let b = sample_fbm(0.3, 100, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.grid_n(), 100);
        assert!(sample_fbm(0.3, 1, 5).is_err());
    }

    #[test]
    fn brownian_terminal_variance() {
        let s = FbmSampler::new(0.5, 1024).unwrap();
        let reps = 10_000;
        let xs: Vec<f64> = (0..reps).map(|r| s.sample(3, r).values()[1024]).collect();
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        let se = (xs.iter().map(|x| (x * x - m2).powi(2)).sum::<f64>() / reps as f64).sqrt()
            / (reps as f64).sqrt();
        assert!((m2 - 1.0).abs() < 3.0 * se, "{m2} {se}");
    }

    #[test]
    fn perturbed_without_perturbation_is_scaled_fbm() {
        let spec = PerturbedFbmSpec {
            c0: 2.0,
            hurst: 0.25,
            perturbation_scale: 0.0,
        };
        let x = PerturbedFbmSampler::new(spec, 64).unwrap().sample(9, 4);
        let b = FbmSampler::new(0.25, 64).unwrap().sample(9, 4);
        for (a, b) in x.values().iter().zip(b.values()) {
            assert_eq!(*a, 2.0 * b);
        }
        assert_eq!(x.kind, PathKind::Perturbed);
    }

    #[test]
    fn u0_covariance_closed_form_at_two() {
        let c = U0Covariance::new(&p(2.0)).unwrap();
        for (s, t) in [(1.0, 1.0), (0.3, 0.8), (0.01, 0.5), (0.0, 0.4)] {
            let exact = ((t + s).sqrt() - (t - s).abs().sqrt()) / (2.0 * PI.sqrt());
            assert!((c.cov(s, t).unwrap() - exact).abs() < 1e-12);
        }
        assert_relative_eq!(
            c.cov(1.0, 1.0).unwrap(),
            1.0 / (2.0 * PI).sqrt(),
            max_relative = 1e-12
        );
    }

    /// Direct spectral quadrature of the covariance with the analytic
    /// `|xi|^{-alpha}/2` tail beyond the cutoff.
    fn direct_covariance(a: f64, s: f64, t: f64) -> f64 {
        let xi_max = 400.0f64;
        let gl = GaussLegendre::new(30);
        let f = |xi: f64| {
            let l = xi.powf(a);
            ((-(t - s).abs() * l).exp() - (-(t + s) * l).exp()) / (2.0 * l)
        };
        let mut acc = 0.0;
        let mut lo = 0.0;
        let mut w = 1e-6;
        while lo < xi_max {
            let hi = (lo + w).min(xi_max);
            acc += gl.integrate(lo, hi, f);
            lo = hi;
            w = (w * 1.5).min(0.5);
        }
        let tail = if s == t {
            xi_max.powf(1.0 - a) / (2.0 * (a - 1.0))
        } else {
            0.0
        };
        (acc + tail) / PI
    }

    #[test]
    fn u0_covariance_matches_direct_spectral_quadrature() {
        for a in [1.25, 1.5, 1.75, 2.0] {
            let c = U0Covariance::new(&p(a)).unwrap();
            for (s, t) in [(1.0, 1.0), (0.5, 1.0), (0.2, 0.3)] {
                let d = direct_covariance(a, s, t);
                assert_relative_eq!(c.cov(s, t).unwrap(), d, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn u0_variance_equals_l2_time_integral() {
        for a in [1.5, 2.0] {
            let v = u0_time_covariance(&p(a), 1.0, 1.0).unwrap();
            let k = crate::kernel::kernel_l2_time_integral(&p(a), 0.0, 1.0).unwrap();
            assert_relative_eq!(v, k, max_relative = 1e-10);
        }
        let c15 = crate::kernel::c_alpha(&p(1.5)).unwrap();
        assert_relative_eq!(
            u0_time_covariance(&p(1.5), 1.0, 1.0).unwrap(),
            3.0 * c15,
            max_relative = 1e-10
        );
        assert_eq!(u0_time_covariance(&p(1.7), 0.0, 0.9).unwrap(), 0.0);
        assert!(u0_time_covariance(&p(1.7), -1.0, 0.9).is_err());
    }

    #[test]
    fn increment_variance_consistent_with_covariance() {
        let c = U0Covariance::new(&p(1.5)).unwrap();
        let (t, d) = (0.4, 0.05);
        let direct = c.cov(t + d, t + d).unwrap() + c.cov(t, t).unwrap()
            - 2.0 * c.cov(t, t + d).unwrap();
        assert_relative_eq!(c.increment_variance(t, d).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn c0_at_two_and_base_point_independence() {
        let c0 = c0_alpha(&p(2.0)).unwrap();
        assert_relative_eq!(c0 * c0, 1.0 / PI.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(c0, 0.751126, max_relative = 1e-6);
        for a in [1.25, 1.5, 1.75, 2.0] {
            let one = c0_alpha_report(&p(a), 1.0).unwrap().c0;
            let half = c0_alpha_report(&p(a), 0.5).unwrap().c0;
            assert_relative_eq!(one, half, max_relative = 1e-3);
            // C_0^2 = 2K
            let k = U0Covariance::new(&p(a)).unwrap().prefactor();
            assert_relative_eq!(one * one, 2.0 * k, max_relative = 1e-6);
        }
        assert_relative_eq!(p(2.0).hurst(), 0.25);
    }

    #[test]
    fn b0_values() {
        assert_relative_eq!(b0_alpha(&p(2.0)).unwrap(), 3.0 / PI, max_relative = 1e-6);
        let c = c0_alpha(&p(1.5)).unwrap();
        assert_relative_eq!(b0_alpha(&p(1.5)).unwrap(), 15.0 * c.powi(6), max_relative = 1e-12);
        assert!(b0_alpha(&p(1.9)).unwrap_err().is_invalid_argument());
        assert_eq!(even_power(4.0 / 3.0).unwrap(), 8);
    }

    #[test]
    fn u0_matrix_is_psd_with_zero_first_row() {
        for a in [1.25, 1.5, 2.0] {
            let m = CovarianceMatrix::u0(&p(a), 64).unwrap();
            assert!(m.entries.max_abs_asymmetry() == 0.0);
            assert!((0..65).all(|j| m.entries.get(0, j) == 0.0));
            Cholesky::factor(m.entries.clone(), CholeskyOptions::default()).unwrap();
            let s = U0Sampler::new(&p(a), 256).unwrap();
            assert!(s.min_pivot() > 0.0);
        }
    }

    #[test]
    fn u0_sampler_terminal_variance() {
        let s = U0Sampler::new(&p(2.0), 512).unwrap();
        let reps = 10_000;
        let paths = s.sample_batch(21, 0, reps);
        assert_eq!(paths[7], s.sample(21, 7));
        let xs: Vec<f64> = paths.iter().map(|p| p.values()[512]).collect();
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        let se = (xs.iter().map(|x| (x * x - m2).powi(2)).sum::<f64>()).sqrt() / reps as f64;
        let target = 1.0 / (2.0 * PI).sqrt();
        assert!((m2 - target).abs() < 3.0 * se, "{m2} {target} {se}");
        assert!(paths.iter().all(|p| p.values()[0] == 0.0));
    }

    #[test]
    fn factor_cap_is_enforced() {
        assert!(U0Sampler::with_cap(&p(2.0), 100, 64).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn spectral_sampler_reproduces_covariance() {
        for a in [1.5, 2.0] {
            let n = 64;
            let s = U0SpectralSampler::new(&p(a), n).unwrap();
            let c = U0Covariance::new(&p(a)).unwrap();
            for (i, j) in [(1, 1), (1, 2), (10, 11), (32, 64), (64, 64), (5, 60)] {
                let exact = c.cov(i as f64 / n as f64, j as f64 / n as f64).unwrap();
                let approx = s.implied_covariance(i, j);
                assert_relative_eq!(approx, exact, max_relative = 1e-6);
            }
            // increment variance at the finest lag, where the high-rate tail matters most
            let inc = s.implied_covariance(33, 33) + s.implied_covariance(32, 32)
                - 2.0 * s.implied_covariance(32, 33);
            let exact = c.increment_variance(0.5, 1.0 / n as f64).unwrap();
            assert_relative_eq!(inc, exact, max_relative = 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fbm_covariance_symmetric_and_bounded(h in 0.01..0.99f64, s in 0.0..3.0f64, t in 0.0..3.0f64) {
            let a = fbm_covariance(h, s, t).unwrap();
            prop_assert!((a - fbm_covariance(h, t, s).unwrap()).abs() < 1e-14);
            let bound = (s.powf(2.0 * h) * t.powf(2.0 * h)).sqrt();
            prop_assert!(a.abs() <= bound + 1e-12);
        }

        #[test]
        fn rho_is_even(h in 0.01..0.99f64, v in -1000i64..1000) {
            prop_assert_eq!(rho(h, v), rho(h, -v));
        }

        #[test]
        fn u0_covariance_cauchy_schwarz(a in 1.05..2.0f64, s in 0.0..2.0f64, t in 0.0..2.0f64) {
            let c = U0Covariance::new(&KernelParams::new(a).unwrap()).unwrap();
            let st = c.cov(s, t).unwrap();
            prop_assert!(st >= -1e-15);
            prop_assert!(st * st <= c.cov(s, s).unwrap() * c.cov(t, t).unwrap() * (1.0 + 1e-12) + 1e-15);
        }
    }
}
