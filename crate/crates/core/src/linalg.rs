//! Dense complex matrices and a Householder least-squares solver.
//!
//! Sizes here are small (a few hundred rows, at most a few dozen columns), so
//! the storage is a plain row-major `Vec`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `Σ conj(a_i)·b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics if the columns do not all have the same length.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Relative threshold on `|R_kk|` below which a column is declared dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Minimises `‖b − A·x‖₂` through a Householder QR factorisation of `A`.
///
/// Requires `A` to have at least as many rows as columns and full column
/// rank; a column whose diagonal `|R_kk|` falls below [`RANK_TOLERANCE`]
/// times the largest column norm gives [`Error::SingularSystem`].
pub fn solve_least_squares(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m, "right-hand side length");
    if n > m {
        return Err(Error::SingularSystem { column: m });
    }
    let scale = (0..n).map(|j| norm(&a.column(j))).fold(0.0, f64::max);
    let mut r = a.clone();
    let mut qb = b.to_vec();
    let mut v = vec![Complex64::new(0.0, 0.0); m];

    for k in 0..n {
        let col_norm = (k..m).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if col_norm <= RANK_TOLERANCE * scale || col_norm == 0.0 {
            return Err(Error::SingularSystem { column: k });
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * col_norm;
        for i in k..m {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vnorm = norm(&v[k..m]);
        for vi in &mut v[k..m] {
            *vi /= vnorm;
        }
        // H = I - 2 v v^H applied to the trailing block and to b.
        for j in k..n {
            let s = inner(&v[k..m], &(k..m).map(|i| r[(i, j)]).collect::<Vec<_>>());
            for i in k..m {
                let vi = v[i];
                r[(i, j)] -= vi * s * 2.0;
            }
        }
        let s = inner(&v[k..m], &qb[k..m]);
        for i in k..m {
            qb[i] -= v[i] * s * 2.0;
        }
    }

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut acc = qb[k];
        for j in k + 1..n {
            acc -= r[(k, j)] * x[j];
        }
        x[k] = acc / r[(k, k)];
    }
    Ok(x)
}
