//! The fractional heat kernel `G_alpha(t, x)`, the density of the symmetric
//! `alpha`-stable law with characteristic function `exp(-t |xi|^alpha)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::quad::{Adaptive, AdaptiveOptions};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelParams {
    /// Order of the fractional Laplacian, in `(1, 2]`.
    pub alpha: f64,
    /// Fixed frequency cutoff. When `None` it is chosen per call so that
    /// `exp(-t Xi^alpha)` is far below `abs_tol`.
    pub tail_cutoff: Option<f64>,
    pub abs_tol: f64,
}

impl KernelParams {
    pub const DEFAULT_ABS_TOL: f64 = 1e-10;

    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_tol(alpha, Self::DEFAULT_ABS_TOL)
    }

    pub fn with_tol(alpha: f64, abs_tol: f64) -> Result<Self> {
        let p = Self {
            alpha,
            tail_cutoff: None,
            abs_tol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (1, 2], got {}",
                self.alpha
            )));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if let Some(c) = self.tail_cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("tail_cutoff must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Hurst index `(alpha - 1) / (2 alpha)` of the temporal behaviour.
    pub fn hurst(&self) -> f64 {
        (self.alpha - 1.0) / (2.0 * self.alpha)
    }

    /// `1 - 1/alpha`, the exponent of the temporal variogram.
    pub fn gamma_exponent(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    /// Frequency cutoff for an integrand decaying like `exp(-rate xi^alpha)`.
    pub(crate) fn cutoff(&self, rate: f64) -> Result<f64> {
        let needed = ((1.0 / self.abs_tol).ln() + 5.0) / rate;
        let auto = needed.powf(1.0 / self.alpha);
        match self.tail_cutoff {
            None => Ok(auto),
            Some(c) => {
                if (-rate * c.powf(self.alpha)).exp() < self.abs_tol {
                    Ok(c)
                } else {
                    Err(Error::invalid(format!(
                        "tail_cutoff {c} leaves exp(-{rate} Xi^alpha) above abs_tol {}",
                        self.abs_tol
                    )))
                }
            }
        }
    }

    /// Integral over `[0, Xi]` of an integrand dominated by `exp(-rate xi^alpha)`.
    pub(crate) fn spectral_integral<F: FnMut(f64) -> f64>(
        &self,
        rate: f64,
        max_width: f64,
        abs_tol: f64,
        f: F,
    ) -> Result<f64> {
        let xi_max = self.cutoff(rate)?;
        let opts = AdaptiveOptions {
            abs_tol,
            max_panel_width: max_width.min(xi_max / 16.0),
            max_depth: 48,
        };
        Ok(Adaptive::default().integrate(0.0, xi_max, opts, f)?.value)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be positive, got {t}")))
    }
}

/// `G_alpha(t, x) = (1/pi) int_0^inf cos(x xi) exp(-t xi^alpha) d xi`.
pub fn green_kernel_value(params: &KernelParams, t: f64, x: f64) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    if !x.is_finite() {
        return Err(Error::invalid("x must be finite"));
    }
    let a = params.alpha;
    let cap = if x != 0.0 {
        PI / (2.0 * x.abs())
    } else {
        f64::INFINITY
    };
    let v = params.spectral_integral(t, cap, PI * params.abs_tol, |xi| {
        (x * xi).cos() * (-t * xi.powf(a)).exp()
    })?;
    Ok(v / PI)
}

/// `c_alpha = (2 pi)^{-1} int exp(-2 |xi|^alpha) d xi`.
pub fn c_alpha(params: &KernelParams) -> Result<f64> {
    params.validate()?;
    let a = params.alpha;
    let v = params.spectral_integral(2.0, f64::INFINITY, 1e-3 * params.abs_tol, |xi| {
        (-2.0 * xi.powf(a)).exp()
    })?;
    Ok(v / PI)
}

/// `m_alpha = int exp(-|eta|^alpha) d eta`.
pub fn m_alpha(params: &KernelParams) -> Result<f64> {
    params.validate()?;
    let a = params.alpha;
    let v = params.spectral_integral(1.0, f64::INFINITY, 1e-3 * params.abs_tol, |xi| {
        (-xi.powf(a)).exp()
    })?;
    Ok(2.0 * v)
}

/// `int_s^t da int G_alpha(t - a, y)^2 dy = c_alpha alpha / (alpha - 1) (t - s)^{1 - 1/alpha}`.
pub fn kernel_l2_time_integral(params: &KernelParams, s: f64, t: f64) -> Result<f64> {
    params.validate()?;
    if !(s >= 0.0 && s <= t && t.is_finite()) {
        return Err(Error::invalid(format!("need 0 <= s <= t, got s={s}, t={t}")));
    }
    if s == t {
        return Ok(0.0);
    }
    let a = params.alpha;
    Ok(c_alpha(params)? * a / (a - 1.0) * (t - s).powf(params.gamma_exponent()))
}

/// The same quantity by two-dimensional quadrature of `G^2` in physical space.
///
/// The time integral uses `t - a = w^q` with `q = alpha / (alpha - 1)`, which
/// removes the `(t - a)^{-1/alpha}` endpoint singularity; the space integral
/// runs over `|y| <= 40 (t - a)^{1/alpha}` plus the leading power-law tail.
pub fn kernel_l2_time_integral_quadrature(params: &KernelParams, s: f64, t: f64) -> Result<f64> {
    params.validate()?;
    if !(s >= 0.0 && s <= t && t.is_finite()) {
        return Err(Error::invalid(format!("need 0 <= s <= t, got s={s}, t={t}")));
    }
    if s == t {
        return Ok(0.0);
    }
    let a = params.alpha;
    let q = a / (a - 1.0);
    let w_max = (t - s).powf(1.0 / q);
    let rule = crate::quad::GaussLegendre::new(12);
    let mut err = None;
    let v = rule.integrate(0.0, w_max, |w| {
        let tau = w.powf(q);
        match squared_kernel_mass(params, tau) {
            Ok(j) => q * w.powf(q - 1.0) * j,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `int G(tau, y)^2 dy` by quadrature of kernel values, in the variable
/// `z = tau^{-1/alpha} y` so that the peak has unit width.
fn squared_kernel_mass(params: &KernelParams, tau: f64) -> Result<f64> {
    let a = params.alpha;
    let scale = tau.powf(1.0 / a);
    let z_max = if a == 2.0 { 14.0 } else { 40.0 };
    // G(tau, .) is of size 1/scale; keep kernel errors well below the panel tolerance.
    let fine = KernelParams {
        abs_tol: 1e-13 / scale,
        ..*params
    };
    let opts = AdaptiveOptions {
        abs_tol: 1e-11 / scale,
        max_panel_width: 1.0,
        max_depth: 40,
    };
    let mut err = None;
    let core = Adaptive::default().integrate(0.0, z_max, opts, |z| {
        match green_kernel_value(&fine, tau, z * scale) {
            Ok(g) => g * g * scale,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mut mass = core.value;
    if a < 2.0 {
        let amp = gamma(a + 1.0) * (PI * a / 2.0).sin() / PI;
        mass += amp * amp * z_max.powf(-1.0 - 2.0 * a) / (1.0 + 2.0 * a) / scale;
    }
    Ok(2.0 * mass)
}

/// `I(s, t, delta)` together with its ratio to `delta^2 (t - s)^{-(alpha+1)/alpha}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelIntegralReport {
    pub value: f64,
    pub bound_constant: f64,
    pub s: f64,
    pub t: f64,
    pub delta: f64,
}

/// `I(s,t,delta) = (2 pi)^{-1} int (1 - e^{-delta |xi|^alpha})^2
///   (e^{-2(t-s)|xi|^alpha} - e^{-2t|xi|^alpha}) / (2 |xi|^alpha) d xi`.
pub fn increment_kernel_integral(
    params: &KernelParams,
    s: f64,
    t: f64,
    delta: f64,
) -> Result<KernelIntegralReport> {
    params.validate()?;
    if !(s >= 0.0 && s < t && t.is_finite()) {
        return Err(Error::invalid(format!("need 0 <= s < t, got s={s}, t={t}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let a = params.alpha;
    let shape = delta * delta * (t - s).powf(-(a + 1.0) / a);
    let v = params.spectral_integral(2.0 * (t - s), f64::INFINITY, 1e-9 * shape, |xi| {
        let lam = xi.powf(a);
        if lam == 0.0 {
            return 0.0;
        }
        let d = -(-delta * lam).exp_m1();
        let w = (-2.0 * (t - s) * lam).exp() * -(-2.0 * s * lam).exp_m1();
        d * d * w / (2.0 * lam)
    })? / PI;
    Ok(KernelIntegralReport {
        value: v,
        bound_constant: v / shape,
        s,
        t,
        delta,
    })
}

/// Empirical checks of the kernel's structural properties at one time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelPropertyReport {
    pub alpha: f64,
    pub t: f64,
    /// `|int G(t, x) dx - 1|`
    pub normalization_error: f64,
    /// `max |G(t, x) - G(t, -x)|` over the test points.
    pub symmetry_error: f64,
    /// `max |G(t, x) - t^{-1/alpha} G(1, t^{-1/alpha} x)|`.
    pub scaling_error: f64,
    /// `max |G(t, x) - (4 pi t)^{-1/2} exp(-x^2/(4t))|` on `[-5, 5]`, only at `alpha = 2`.
    pub closed_form_error: Option<f64>,
    /// Range of `G(t, x) (1 + |z|)^{1+alpha} t^{1/alpha}` with `z = t^{-1/alpha} x`.
    pub sandwich_min: f64,
    pub sandwich_max: f64,
    /// Largest `|z|` on the sandwich grid.
    pub sandwich_extent: f64,
    pub min_value: f64,
}

impl KernelPropertyReport {
    pub fn positive(&self) -> bool {
        self.min_value > 0.0 && self.sandwich_min > 0.0
    }
}

/// Normalization, symmetry, scaling, closed form (at `alpha = 2`) and the
/// two-sided power-law envelope.
///
/// The envelope is evaluated for `|z| <= 20`, except at `alpha = 2` where the
/// Gaussian tail forces a bounded range `|z| <= 4`.
pub fn kernel_property_check(params: &KernelParams, t: f64) -> Result<KernelPropertyReport> {
    params.validate()?;
    check_time(t)?;
    let a = params.alpha;
    let scale = t.powf(1.0 / a);
    let g = |x: f64| green_kernel_value(params, t, x);

    let normalization_error = (normalization(params, t)? - 1.0).abs();

    let test_z: Vec<f64> = (0..=40).map(|i| 0.125 * i as f64).collect();
    let mut symmetry_error: f64 = 0.0;
    let mut scaling_error: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for &z in &test_z {
        let x = z * scale;
        let gp = g(x)?;
        let gm = g(-x)?;
        symmetry_error = symmetry_error.max((gp - gm).abs());
        let unit = green_kernel_value(params, 1.0, z)? / scale;
        scaling_error = scaling_error.max((gp - unit).abs());
        min_value = min_value.min(gp).min(gm);
    }

    let closed_form_error = if a == 2.0 {
        let mut e: f64 = 0.0;
        for i in 0..=200 {
            let x = -5.0 + 0.05 * i as f64;
            let exact = (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp();
            e = e.max((g(x)? - exact).abs());
        }
        Some(e)
    } else {
        None
    };

    let extent = if a == 2.0 { 4.0 } else { 20.0 };
    let mut smin = f64::INFINITY;
    let mut smax: f64 = 0.0;
    for i in 0..=80 {
        let z = extent * i as f64 / 80.0;
        let v = g(z * scale)?;
        min_value = min_value.min(v);
        let r = v * (1.0 + z).powf(1.0 + a) * scale;
        smin = smin.min(r);
        smax = smax.max(r);
    }

    Ok(KernelPropertyReport {
        alpha: a,
        t,
        normalization_error,
        symmetry_error,
        scaling_error,
        closed_form_error,
        sandwich_min: smin,
        sandwich_max: smax,
        sandwich_extent: extent,
        min_value,
    })
}

/// `int G(t, x) dx`: quadrature of kernel values on `|x| <= Z t^{1/alpha}` plus
/// the asymptotic expansion of the tail mass.
fn normalization(params: &KernelParams, t: f64) -> Result<f64> {
    let a = params.alpha;
    let scale = t.powf(1.0 / a);
    let z_max: f64 = if a == 2.0 { 14.0 } else { 60.0 };
    let opts = AdaptiveOptions {
        abs_tol: 1e-9,
        max_panel_width: 2.0 * scale,
        max_depth: 40,
    };
    let mut err = None;
    let core = Adaptive::default().integrate(0.0, z_max * scale, opts, |x| {
        match green_kernel_value(params, t, x) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    // G(1, z) ~ (1/pi) sum_k (-1)^{k+1} Gamma(k alpha + 1)/k! sin(k pi alpha/2) z^{-k alpha - 1}
    let mut tail = 0.0;
    if a < 2.0 {
        let mut fact = 1.0;
        for k in 1..=8 {
            fact *= k as f64;
            let ka = k as f64 * a;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            tail += sign * gamma(ka + 1.0) / fact * (k as f64 * PI * a / 2.0).sin()
                * z_max.powf(-ka)
                / ka;
        }
        tail /= PI;
    }
    Ok(2.0 * (core.value + tail))
}
