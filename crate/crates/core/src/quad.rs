//! Gauss-Legendre quadrature: fixed rules and adaptive panel bisection.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Controls for [`Adaptive::integrate`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    /// Initial panels are no wider than this.
    pub max_panel_width: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_panel_width: f64::INFINITY,
            max_depth: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Adaptive bisection driven by a 20-point Gauss-Legendre rule: a panel is
/// accepted when the rule on the panel and on its two halves agree within
/// the panel's share of the tolerance.
#[derive(Debug, Clone)]
pub struct Adaptive {
    rule: GaussLegendre,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self::new(20)
    }
}

impl Adaptive {
    pub fn new(points: usize) -> Self {
        Self {
            rule: GaussLegendre::new(points),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        opts: AdaptiveOptions,
        mut f: F,
    ) -> Result<QuadResult> {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::invalid(format!("bad quadrature interval [{a}, {b}]")));
        }
        if b == a {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
            });
        }
        let total = b - a;
        let n0 = if opts.max_panel_width.is_finite() && opts.max_panel_width > 0.0 {
            (total / opts.max_panel_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let mut stack: Vec<(f64, f64, f64, u32)> = Vec::with_capacity(64);
        let mut evals = 0usize;
        let width0 = total / n0 as f64;
        for i in (0..n0).rev() {
            let lo = a + width0 * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width0 };
            let v = self.rule.integrate(lo, hi, &mut f);
            evals += self.rule.nodes.len();
            stack.push((lo, hi, v, 0));
        }
        let mut acc = crate::sum::Neumaier::new();
        let mut err = 0.0;
        while let Some((lo, hi, whole, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let left = self.rule.integrate(lo, mid, &mut f);
            let right = self.rule.integrate(mid, hi, &mut f);
            evals += 2 * self.rule.nodes.len();
            let refined = left + right;
            let diff = (refined - whole).abs();
            let local_tol = (opts.abs_tol * (hi - lo) / total).max(f64::EPSILON * refined.abs());
            if !refined.is_finite() {
                return Err(Error::numerical(
                    "quadrature",
                    format!("non-finite integrand on [{lo}, {hi}]"),
                ));
            }
            if diff <= local_tol {
                acc.add(refined);
                err += diff;
            } else if depth >= opts.max_depth {
                return Err(Error::numerical(
                    "quadrature",
                    format!(
                        "no convergence on [{lo:.6e}, {hi:.6e}] after {depth} bisections: \
                         panel discrepancy {diff:.3e} > tolerance {local_tol:.3e}"
                    ),
                ));
            } else {
                stack.push((mid, hi, right, depth + 1));
                stack.push((lo, mid, left, depth + 1));
            }
        }
        Ok(QuadResult {
            value: acc.total(),
            error_estimate: err,
            evaluations: evals,
        })
    }
}
