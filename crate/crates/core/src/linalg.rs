//! Dense symmetric factorization for Gaussian sampling.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: alloc::vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            s[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7])) + tail
}

/// Lower Cholesky factor of a symmetric positive semidefinite matrix.
///
/// Pivots in `[-clamp_rel * max_diag, zero_rel * max_diag]` are treated as
/// exact zeros and their column is dropped; a pivot below that range is an
/// error reporting the offending index and value.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    clamped: usize,
    min_pivot: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CholeskyOptions {
    pub clamp_rel: f64,
    pub zero_rel: f64,
}

impl Default for CholeskyOptions {
    fn default() -> Self {
        Self {
            clamp_rel: 1e-8,
            zero_rel: 1e-14,
        }
    }
}

impl Cholesky {
    /// Factorizes the lower triangle of `a` in place. Row blocks share the
    /// streamed pivot rows so large factors stay cache friendly.
    pub fn factor(mut a: DenseMatrix, opts: CholeskyOptions) -> Result<Self> {
        let n = a.n;
        let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0f64, f64::max);
        if !(max_diag.is_finite()) {
            return Err(Error::numerical("cholesky", "non-finite diagonal"));
        }
        if max_diag == 0.0 {
            for v in a.data.iter_mut() {
                *v = 0.0;
            }
            return Ok(Self {
                l: a,
                clamped: n,
                min_pivot: 0.0,
            });
        }
        let neg_tol = -opts.clamp_rel * max_diag;
        let zero_tol = opts.zero_rel * max_diag;
        let mut clamped = 0;
        let mut min_pivot = f64::INFINITY;
        const B: usize = 32;
        let mut inv_diag = alloc::vec![0.0f64; n];
        let mut i0 = 0;
        while i0 < n {
            let i1 = (i0 + B).min(n);
            // Off-diagonal entries of rows i0..i1 against earlier finished rows.
            for j in 0..i0 {
                let (head, tail) = a.data.split_at_mut(i0 * n);
                let rj = &head[j * n..j * n + j];
                let inv = inv_diag[j];
                for i in i0..i1 {
                    let ri = &mut tail[(i - i0) * n..(i - i0) * n + n];
                    let s = dot(&ri[..j], rj);
                    ri[j] = if inv == 0.0 { 0.0 } else { (ri[j] - s) * inv };
                }
            }
            // Diagonal block.
            for i in i0..i1 {
                for j in i0..i {
                    let (head, tail) = a.data.split_at_mut(i * n);
                    let rj = &head[j * n..j * n + j];
                    let ri = &mut tail[..n];
                    let s = dot(&ri[..j], rj);
                    let inv = inv_diag[j];
                    ri[j] = if inv == 0.0 { 0.0 } else { (ri[j] - s) * inv };
                }
                let ri = a.row_mut(i);
                let d = ri[i] - dot(&ri[..i], &ri[..i]);
                min_pivot = min_pivot.min(d);
                if d > zero_tol {
                    let r = d.sqrt();
                    ri[i] = r;
                    inv_diag[i] = 1.0 / r;
                } else if d >= neg_tol {
                    ri[i] = 0.0;
                    inv_diag[i] = 0.0;
                    clamped += 1;
                } else {
                    return Err(Error::numerical(
                        "cholesky",
                        format!(
                            "matrix indefinite beyond tolerance: pivot {i} = {d:.6e} \
                             (largest diagonal {max_diag:.6e})"
                        ),
                    ));
                }
            }
            i0 = i1;
        }
        for i in 0..n {
            for v in &mut a.row_mut(i)[i + 1..] {
                *v = 0.0;
            }
        }
        Ok(Self {
            l: a,
            clamped,
            min_pivot,
        })
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Number of pivots treated as zero.
    pub fn clamped_pivots(&self) -> usize {
        self.clamped
    }

    /// Smallest Schur-complement pivot seen, before clamping.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// `out = L z`.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let n = self.l.n;
        assert_eq!(z.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            out[i] = dot(&self.l.row(i)[..=i], &z[..=i]);
        }
    }

    /// `outs[r] = L zs[r]` for a batch, reading each row of `L` once.
    pub fn mul_lower_batch(&self, zs: &[Vec<f64>], outs: &mut [Vec<f64>]) {
        let n = self.l.n;
        assert_eq!(zs.len(), outs.len());
        for i in 0..n {
            let row = &self.l.row(i)[..=i];
            for (z, o) in zs.iter().zip(outs.iter_mut()) {
                o[i] = dot(row, &z[..=i]);
            }
        }
    }
}
