//! Radix-2 FFT on `num_complex::Complex<f64>` with a packed real transform.
//!
//! Conventions: forward `X_k = sum_n x_n exp(-2 pi i k n / M)`, inverse carries
//! the `1/M` factor.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Precomputed plan for complex transforms of one power-of-two length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    /// Per-stage twiddles `exp(-2 pi i k / (2h))`, `k < h`, for `h = 2, 4, ..`.
    fwd_stage: Vec<Complex64>,
    inv_stage: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::invalid(alloc::format!(
                "FFT length must be a power of two, got {n}"
            )));
        }
        let mut fwd_stage = Vec::new();
        let mut half = 2;
        while half < n {
            for k in 0..half {
                let a = -PI * (k as f64) / (half as f64);
                fwd_stage.push(Complex64::new(a.cos(), a.sin()));
            }
            half *= 2;
        }
        let inv_stage = fwd_stage.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    (i as u32).reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Ok(Self {
            n,
            fwd_stage,
            inv_stage,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// In-place inverse transform, including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "FFT buffer length mismatch");
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        if n >= 2 {
            for pair in data.chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = a + b;
                pair[1] = a - b;
            }
        }
        let twiddles = if inverse { &self.inv_stage } else { &self.fwd_stage };
        let mut half = 2;
        let mut offset = 0;
        while half < n {
            let w = &twiddles[offset..offset + half];
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = *b * *w;
                    *b = *a - t;
                    *a += t;
                }
            }
            offset += half;
            half *= 2;
        }
    }
}

/// Real-to-half-complex transform of even power-of-two length `m`, computed
/// with one complex transform of length `m/2`.
#[derive(Debug, Clone)]
pub struct RealFft {
    m: usize,
    inner: FftPlan,
    /// `exp(-2 pi i k / m)` for `k <= m/2`.
    w: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RealFft {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::invalid(alloc::format!(
                "real FFT length must be a power of two >= 2, got {m}"
            )));
        }
        let w = (0..=m / 2)
            .map(|k| {
                let a = -2.0 * PI * (k as f64) / (m as f64);
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        Ok(Self {
            m,
            inner: FftPlan::new(m / 2)?,
            w,
            scratch: alloc::vec![Complex64::new(0.0, 0.0); m / 2],
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Number of stored half-spectrum coefficients, `m/2 + 1`.
    pub fn spectrum_len(&self) -> usize {
        self.m / 2 + 1
    }

    /// `out[k] = X_k` for `k = 0..=m/2`.
    pub fn forward(&mut self, input: &[f64], out: &mut [Complex64]) {
        let h = self.m / 2;
        assert_eq!(input.len(), self.m);
        assert_eq!(out.len(), h + 1);
        for j in 0..h {
            self.scratch[j] = Complex64::new(input[2 * j], input[2 * j + 1]);
        }
        self.inner.forward(&mut self.scratch);
        let z = &self.scratch;
        for k in 0..=h {
            let zk = z[k % h];
            let zc = z[(h - k) % h].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = even + self.w[k] * odd;
        }
    }

    /// Inverse of [`RealFft::forward`] including the `1/m` factor. Imaginary
    /// parts of `X_0` and `X_{m/2}` are ignored.
    pub fn inverse(&mut self, spectrum: &[Complex64], out: &mut [f64]) {
        let h = self.m / 2;
        assert_eq!(spectrum.len(), h + 1);
        assert_eq!(out.len(), self.m);
        let x0 = Complex64::new(spectrum[0].re, 0.0);
        let xh = Complex64::new(spectrum[h].re, 0.0);
        for k in 0..h {
            let xk = if k == 0 { x0 } else { spectrum[k] };
            let xr = if k == 0 { xh } else { spectrum[h - k] }.conj();
            let even = (xk + xr) * 0.5;
            let odd = (xk - xr) * self.w[k].conj() * 0.5;
            self.scratch[k] = even + Complex64::new(-odd.im, odd.re);
        }
        self.inner.inverse(&mut self.scratch);
        for j in 0..h {
            out[2 * j] = self.scratch[j].re;
            out[2 * j + 1] = self.scratch[j].im;
        }
    }
}
