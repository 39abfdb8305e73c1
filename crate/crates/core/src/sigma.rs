//! Diffusion coefficients.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Globally Lipschitz diffusion coefficient `sigma(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SigmaSpec {
    Constant { c: f64 },
    /// `a + b u`
    Affine { a: f64, b: f64 },
    /// `a + b sin(omega u)`
    Sinusoidal { a: f64, b: f64, omega: f64 },
}

impl SigmaSpec {
    pub const ONE: SigmaSpec = SigmaSpec::Constant { c: 1.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaSpec::Constant { c } => c.is_finite(),
            SigmaSpec::Affine { a, b } => a.is_finite() && b.is_finite(),
            SigmaSpec::Sinusoidal { a, b, omega } => {
                a.is_finite() && b.is_finite() && omega.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("sigma parameters must be finite"))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            SigmaSpec::Constant { c } => c,
            SigmaSpec::Affine { a, b } => a + b * u,
            SigmaSpec::Sinusoidal { a, b, omega } => a + b * (omega * u).sin(),
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::Affine { b, .. } => b.abs(),
            SigmaSpec::Sinusoidal { b, omega, .. } => (b * omega).abs(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            SigmaSpec::Constant { c } => Some(c),
            _ => None,
        }
    }

    /// `s * sigma`, the coefficient of the time-rescaled equation.
    pub fn scaled(&self, s: f64) -> SigmaSpec {
        match *self {
            SigmaSpec::Constant { c } => SigmaSpec::Constant { c: s * c },
            SigmaSpec::Affine { a, b } => SigmaSpec::Affine { a: s * a, b: s * b },
            SigmaSpec::Sinusoidal { a, b, omega } => SigmaSpec::Sinusoidal {
                a: s * a,
                b: s * b,
                omega,
            },
        }
    }
}
