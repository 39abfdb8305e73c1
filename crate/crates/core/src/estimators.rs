//! Estimators of the anomality `alpha` and the drift `theta`.

use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gaussian::{b0_alpha, c0_alpha, even_power};
use crate::kernel::KernelParams;
use crate::path::Path;
use crate::sigma::SigmaSpec;
use crate::variations::{power_variation, quad_variation_renorm, riemann_sigma_sum};

/// Floor below which a Riemann sum counts as zero.
pub const RIEMANN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimateTarget {
    Alpha,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimateMethod {
    LogRatio,
    Quad,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateConstants {
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub c0: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub b0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateResult {
    pub target: EstimateTarget,
    pub method: EstimateMethod,
    pub estimate: f64,
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub a_n: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub statistic: Option<f64>,
    pub riemann_sum: f64,
    pub constants: EstimateConstants,
}

fn check_n(path: &Path) -> Result<()> {
    if path.grid_n() < 4 {
        return Err(Error::invalid(format!("estimators need N >= 4, got {}", path.grid_n())));
    }
    Ok(())
}

fn floor_check(riemann: f64) -> Result<()> {
    if riemann > RIEMANN_FLOOR {
        Ok(())
    } else {
        Err(Error::degenerate(format!(
            "Riemann sum {riemann:e} is below the floor {RIEMANN_FLOOR:e}"
        )))
    }
}

/// `alpha_hat = log N / log A_N` with
/// `A_N = sum (Delta u)^2 / ((1/N) sum sigma(u(t_i))^2)`.
pub fn estimate_alpha(path: &Path, sigma: &SigmaSpec) -> Result<EstimateResult> {
    check_n(path)?;
    let n = path.grid_n();
    let sq = power_variation(path, 2.0)?.statistic;
    if sq == 0.0 {
        return Err(Error::degenerate("path has no increments"));
    }
    let r = riemann_sigma_sum(path, sigma, 2.0)?;
    floor_check(r)?;
    let a_n = sq / r;
    if !(a_n > 1.0) {
        return Err(Error::EstimatorUndefined(format!(
            "A_N = {a_n} <= 1 (N = {n}); the log-ratio has no positive finite value"
        )));
    }
    Ok(EstimateResult {
        target: EstimateTarget::Alpha,
        method: EstimateMethod::LogRatio,
        estimate: (n as f64).ln() / a_n.ln(),
        n,
        a_n: Some(a_n),
        statistic: Some(sq),
        riemann_sum: r,
        constants: EstimateConstants::default(),
    })
}

/// `theta_hat_1 = (V_N / (C_0^2 (1/N) sum sigma^2))^{-alpha}`.
pub fn estimate_theta_quadratic(
    path: &Path,
    alpha: f64,
    sigma: &SigmaSpec,
    c0: f64,
) -> Result<EstimateResult> {
    check_n(path)?;
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::invalid(format!("C_0 must be positive, got {c0}")));
    }
    let v = quad_variation_renorm(path, alpha)?.statistic;
    if v == 0.0 {
        return Err(Error::degenerate("quadratic variation vanishes"));
    }
    let r = riemann_sigma_sum(path, sigma, 2.0)?;
    floor_check(r)?;
    Ok(EstimateResult {
        target: EstimateTarget::Theta,
        method: EstimateMethod::Quad,
        estimate: (v / (c0 * c0 * r)).powf(-alpha),
        n: path.grid_n(),
        a_n: None,
        statistic: Some(v),
        riemann_sum: r,
        constants: EstimateConstants {
            c0: Some(c0),
            b0: None,
        },
    })
}

/// `theta_hat_2 = (U_N / (B_0 (1/N) sum sigma^p))^{-(alpha - 1)}`,
/// `p = 2 alpha / (alpha - 1)` an even integer.
pub fn estimate_theta_power(
    path: &Path,
    alpha: f64,
    sigma: &SigmaSpec,
    b0: f64,
) -> Result<EstimateResult> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    let p = even_power(alpha)? as f64;
    check_n(path)?;
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(Error::invalid(format!("B_0 must be positive, got {b0}")));
    }
    let u = power_variation(path, p)?.statistic;
    if u == 0.0 {
        return Err(Error::degenerate("power variation vanishes"));
    }
    let r = riemann_sigma_sum(path, sigma, p)?;
    floor_check(r)?;
    Ok(EstimateResult {
        target: EstimateTarget::Theta,
        method: EstimateMethod::Power,
        estimate: (u / (b0 * r)).powf(-(alpha - 1.0)),
        n: path.grid_n(),
        a_n: None,
        statistic: Some(u),
        riemann_sum: r,
        constants: EstimateConstants {
            c0: None,
            b0: Some(b0),
        },
    })
}

/// `(C_0^2 theta^{-1/alpha} m_2, B_0 theta^{-1/(alpha-1)} m_p)` from
/// explicit constants.
pub fn limits_from_constants(
    alpha: f64,
    theta: f64,
    c0: f64,
    b0: f64,
    sigma_moment_2: f64,
    sigma_moment_p: f64,
) -> Result<(f64, f64)> {
    if !(sigma_moment_2 >= 0.0 && sigma_moment_p >= 0.0) {
        return Err(Error::invalid("sigma moments must be nonnegative"));
    }
    if !(theta > 0.0) {
        return Err(Error::invalid("theta must be positive"));
    }
    Ok((
        c0 * c0 * theta.powf(-1.0 / alpha) * sigma_moment_2,
        b0 * theta.powf(-1.0 / (alpha - 1.0)) * sigma_moment_p,
    ))
}

/// Limits of `V_N` and `U_N` with `C_0`, `B_0` derived for `params.alpha`.
/// The second entry is `None` when `2 alpha / (alpha - 1)` is not an even
/// integer.
pub fn theoretical_limits(
    params: &KernelParams,
    theta: f64,
    sigma_moment_2: f64,
    sigma_moment_p: f64,
) -> Result<(f64, Option<f64>)> {
    let c0 = c0_alpha(params)?;
    let b0 = if even_power(params.alpha).is_ok() {
        Some(b0_alpha(params)?)
    } else {
        None
    };
    let (v, u) = limits_from_constants(
        params.alpha,
        theta,
        c0,
        b0.unwrap_or(0.0),
        sigma_moment_2,
        sigma_moment_p,
    )?;
    Ok((v, b0.map(|_| u)))
}
