//! Temporal variation functionals and Riemann sums of `sigma`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::sigma::SigmaSpec;
use crate::sum::Neumaier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VariationKind {
    QuadRenorm,
    PowerP,
    FbmNorm,
}

impl VariationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VariationKind::QuadRenorm => "quad_renorm",
            VariationKind::PowerP => "power_p",
            VariationKind::FbmNorm => "fbm_norm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariationResult {
    pub statistic: f64,
    pub kind: VariationKind,
    pub grid_n: usize,
    /// The statistic is `N^{normalization_exponent} sum |Delta_i|^p`.
    pub normalization_exponent: f64,
    pub p: f64,
    /// `alpha` or `H` the normalization was derived from, when applicable.
    pub parameter: Option<f64>,
}

/// `|x|^q`, exact repeated multiplication for integer `q`.
#[inline]
pub fn sigma_power(x: f64, q: f64) -> f64 {
    if q == q.trunc() && q.abs() <= 64.0 {
        x.abs().powi(q as i32)
    } else {
        x.abs().powf(q)
    }
}

fn check_path(path: &Path) -> Result<()> {
    if path.grid_n() < 2 {
        return Err(Error::invalid("variations need N >= 2"));
    }
    if path.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("path contains non-finite values"));
    }
    Ok(())
}

fn increment_power_sum(path: &Path, p: f64) -> f64 {
    path.increments()
        .map(|d| sigma_power(d, p))
        .collect::<Neumaier>()
        .total()
}

/// `V_N = N^{-1/alpha} sum_i (u(t_{i+1}) - u(t_i))^2`.
pub fn quad_variation_renorm(path: &Path, alpha: f64) -> Result<VariationResult> {
    check_path(path)?;
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    let n = path.grid_n();
    let e = -1.0 / alpha;
    Ok(VariationResult {
        statistic: (n as f64).powf(e) * increment_power_sum(path, 2.0),
        kind: VariationKind::QuadRenorm,
        grid_n: n,
        normalization_exponent: e,
        p: 2.0,
        parameter: Some(alpha),
    })
}

/// `U_N = sum_i |u(t_{i+1}) - u(t_i)|^p`.
pub fn power_variation(path: &Path, p: f64) -> Result<VariationResult> {
    check_path(path)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be positive, got {p}")));
    }
    Ok(VariationResult {
        statistic: increment_power_sum(path, p),
        kind: VariationKind::PowerP,
        grid_n: path.grid_n(),
        normalization_exponent: 0.0,
        p,
        parameter: None,
    })
}

/// `N^{2H-1} sum_i (Delta_i)^2`.
pub fn fbm_normalized_variation(path: &Path, hurst: f64) -> Result<VariationResult> {
    check_path(path)?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::invalid(format!("Hurst index must lie in (0, 1), got {hurst}")));
    }
    let n = path.grid_n();
    let e = 2.0 * hurst - 1.0;
    Ok(VariationResult {
        statistic: (n as f64).powf(e) * increment_power_sum(path, 2.0),
        kind: VariationKind::FbmNorm,
        grid_n: n,
        normalization_exponent: e,
        p: 2.0,
        parameter: Some(hurst),
    })
}

/// `(1/N) sum_{i=1}^N sigma(u(t_i))^q`.
pub fn riemann_sigma_sum(path: &Path, sigma: &SigmaSpec, q: f64) -> Result<f64> {
    if path.grid_n() < 1 {
        return Err(Error::invalid("Riemann sum needs N >= 1"));
    }
    if !(q > 0.0) {
        return Err(Error::invalid(format!("q must be positive, got {q}")));
    }
    let s: Neumaier = path.values()[1..]
        .iter()
        .map(|&u| sigma_power(sigma.eval(u), q))
        .collect();
    Ok(s.total() / path.grid_n() as f64)
}

/// The `alpha` with `2 alpha / (alpha - 1) = p`, i.e. `p / (p - 2)`.
pub fn admissible_alpha(p: u32) -> Result<f64> {
    if p < 4 || !p.is_multiple_of(2) {
        return Err(Error::invalid(format!("p must be an even integer >= 4, got {p}")));
    }
    Ok(p as f64 / (p as f64 - 2.0))
}

/// Ordinary least squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<Neumaier>().total() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::PathKind;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn path(v: Vec<f64>) -> Path {
        Path::new(v, 0.0, PathKind::SpdeNumeric).unwrap()
    }

    #[test]
    fn zero_path() {
        let p = path(vec![0.0; 9]);
        assert_eq!(quad_variation_renorm(&p, 2.0).unwrap().statistic, 0.0);
        assert_eq!(fbm_normalized_variation(&p, 0.25).unwrap().statistic, 0.0);
    }

    #[test]
    fn riemann_examples() {
        let p = path(vec![0.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(riemann_sigma_sum(&p, &SigmaSpec::ONE, 2.0).unwrap(), 1.0);
        let id = SigmaSpec::Affine { a: 0.0, b: 1.0 };
        assert_eq!(riemann_sigma_sum(&p, &id, 2.0).unwrap(), 4.0);
    }

    #[test]
    fn admissible() {
        assert_eq!(admissible_alpha(4).unwrap(), 2.0);
        assert_eq!(admissible_alpha(6).unwrap(), 1.5);
        assert_relative_eq!(admissible_alpha(8).unwrap(), 4.0 / 3.0);
        assert!(admissible_alpha(3).is_err());
        assert!(admissible_alpha(2).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = path(vec![0.0, f64::NAN, 1.0]);
        assert!(quad_variation_renorm(&p, 2.0).is_err());
        let p = path(vec![0.0, 1.0, 1.0]);
        assert!(power_variation(&p, 0.0).is_err());
        assert!(quad_variation_renorm(&p, 1.0).is_err());
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_relative_eq!(ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]), 2.0);
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_relative_eq!(se, (1.0f64 / 3.0).sqrt());
    }

    fn arb_path() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, 3..200)
    }

    proptest! {
        #[test]
        fn exponent_identity(v in arb_path(), a in 1.01..2.0f64) {
            let p = path(v);
            let h = (a - 1.0) / (2.0 * a);
            let q = quad_variation_renorm(&p, a).unwrap().statistic;
            let f = fbm_normalized_variation(&p, h).unwrap().statistic;
            prop_assert!((q - f).abs() <= 1e-12 * q.abs().max(1e-300));
        }

        #[test]
        fn homogeneity(v in arb_path(), c in -5.0..5.0f64, a in 1.01..2.0f64) {
            let p = path(v);
            let q = quad_variation_renorm(&p, a).unwrap().statistic;
            let qc = quad_variation_renorm(&p.scaled(c), a).unwrap().statistic;
            prop_assert!((qc - c * c * q).abs() <= 1e-12 * (c * c * q).abs().max(1e-12));
        }

        #[test]
        fn power_two_is_unnormalized_quadratic(v in arb_path(), a in 1.01..2.0f64) {
            let p = path(v);
            let n = p.grid_n() as f64;
            let u = power_variation(&p, 2.0).unwrap().statistic;
            let q = quad_variation_renorm(&p, a).unwrap().statistic;
            prop_assert!((u - n.powf(1.0 / a) * q).abs() <= 1e-10 * u.max(1e-12));
        }

        #[test]
        fn power_variation_is_even(v in arb_path(), pw in 0.5..8.0f64) {
            let p = path(v);
            let a = power_variation(&p, pw).unwrap().statistic;
            let b = power_variation(&p.scaled(-1.0), pw).unwrap().statistic;
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0);
        }
    }
}
