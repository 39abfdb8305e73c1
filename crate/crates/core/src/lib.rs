//! Numerical core for the fractional stochastic heat equation
//!
//! ```text
//! du/dt = -theta (-Laplacian)^{alpha/2} u + sigma(u) dW/dt dx,   u(0, .) = 0,
//! ```
//!
//! driven by space-time white noise, with `alpha` in `(1, 2]`.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: the fractional heat kernel and its L2 time integrals,
//! * [`gaussian`]: exact Gaussian samplers (fBm, perturbed fBm, the linear
//!   solution at a fixed point) and the constants `C_{0,alpha}`, `B_{0,alpha}`,
//! * [`spde`]: a pseudo-spectral exponential integrator for the nonlinear
//!   equation, the drift rescaling, and the coupled-increment construction,
//! * [`variations`]: renormalized quadratic and higher order temporal variations,
//! * [`estimators`]: estimators of the anomality `alpha` and the drift `theta`.
//!
//! Everything is deterministic given a seed: random draws come from counter
//! based streams addressed by `(seed, replicate)` (see [`rng`]).
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; enable `libm` in that case for the transcendental functions.
#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("enable either the `std` or the `libm` feature");

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod fft;
pub mod gaussian;
pub mod kernel;
pub mod linalg;
pub mod path;
pub mod quad;
pub mod rng;
pub mod sigma;
pub mod special;
pub mod spde;
pub mod sum;
pub mod variations;

pub use error::{Error, Result};
pub use kernel::KernelParams;
pub use path::{Path, PathKind};
pub use sigma::SigmaSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
