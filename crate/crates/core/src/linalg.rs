//! Dense complex matrices.
//!
//! Only what the modulation and receiver matrices need: products,
//! adjoint, inversion by Gauss-Jordan elimination with partial pivoting and a
//! 1-norm condition estimate.

use std::io::Write;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::num::Real;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols, "dimension mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .fold(Complex::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * *b;
                }
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c).norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// max |self - I| over all entries.
    pub fn max_abs_dev_from_identity(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { Complex::one() } else { Complex::zero() };
                worst = worst.max((self.get(r, c) - target).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// Inverse together with the reciprocal 1-norm condition number.
    ///
    /// Fails with [`Error::Singular`] when a pivot vanishes or the reciprocal
    /// condition falls below `rcond_floor`.
    pub fn inverse(&self, rcond_floor: f64) -> Result<(Self, f64)> {
        if self.rows != self.cols {
            return Err(Error::Domain("cannot invert a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .norm_sqr()
                        .partial_cmp(&a[j * n + col].norm_sqr())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            let pivot = a[pivot_row * n + col];
            if pivot.norm_sqr() == T::zero() || !pivot.norm_sqr().is_finite() {
                return Err(Error::Singular { rcond: 0.0 });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot_row * n + c);
                    inv.swap(col * n + c, pivot_row * n + c);
                }
            }
            let scale = pivot.inv();
            for c in 0..n {
                a[col * n + c] = a[col * n + c] * scale;
                inv[col * n + c] = inv[col * n + c] * scale;
            }
            let (pivot_a, pivot_inv) = (a[col * n..(col + 1) * n].to_vec(), inv[col * n..(col + 1) * n].to_vec());
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor.is_zero() {
                    continue;
                }
                let row_a = &mut a[r * n..(r + 1) * n];
                for (x, p) in row_a.iter_mut().zip(&pivot_a) {
                    *x = *x - factor * *p;
                }
                let row_inv = &mut inv[r * n..(r + 1) * n];
                for (x, p) in row_inv.iter_mut().zip(&pivot_inv) {
                    *x = *x - factor * *p;
                }
            }
        }
        let inverse = Self {
            rows: n,
            cols: n,
            data: inv,
        };
        let rcond = 1.0 / (self.norm1().to_f64_lossy() * inverse.norm1().to_f64_lossy());
        if !(rcond >= rcond_floor) {
            return Err(Error::Singular { rcond });
        }
        Ok((inverse, rcond))
    }

    /// Writes the matrix as CSV, one row per line, cells formatted `re,im`
    /// and quoted so that each cell stays a single CSV field.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.rows {
            let line = self
                .row(r)
                .iter()
                .map(|z| format!("\"{:.12e},{:.12e}\"", z.re.to_f64_lossy(), z.im.to_f64_lossy()))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
