//! Small dense row-major matrices. Everything here is at most a few dozen
//! rows, so plain Gauss-Jordan and Cholesky are adequate.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m.data[i * n_cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(rows.len(), n_cols, |i, j| rows[i][j])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// (A + A^T) / 2
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.n_rows, self.n_cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        Self::from_fn(self.n_rows, other.n_cols, |i, j| {
            (0..self.n_cols).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gauss-Jordan inverse with partial pivoting. `None` when a pivot
    /// vanishes relative to the matrix scale.
    pub fn inverse(&self) -> Option<Matrix> {
        let n = self.n_rows;
        if n != self.n_cols {
            return None;
        }
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r, &s| a.get(r, col).abs().total_cmp(&a.get(s, col).abs()))
                .unwrap_or(col);
            let pivot = a.get(pivot_row, col);
            if pivot.abs() <= scale * 1e-14 {
                return None;
            }
            if pivot_row != col {
                a.swap_rows(col, pivot_row);
                inv.swap_rows(col, pivot_row);
            }
            for j in 0..n {
                a.set(col, j, a.get(col, j) / pivot);
                inv.set(col, j, inv.get(col, j) / pivot);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - factor * a.get(col, j));
                    inv.set(r, j, inv.get(r, j) - factor * inv.get(col, j));
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.n_cols {
            self.data.swap(a * self.n_cols + j, b * self.n_cols + j);
        }
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.n_rows;
        let mut a = self.symmetrized();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * a.get(i, j))
                .sum();
            if off <= 1e-30 * a.data.iter().map(|x| x * x).sum::<f64>() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig = a.diagonal();
        eig.sort_by(f64::total_cmp);
        eig
    }

    /// Lower-triangular `L` with `L L^T = self`, for symmetric positive
    /// definite input.
    pub fn cholesky(&self) -> Option<Matrix> {
        let n = self.n_rows;
        if n != self.n_cols {
            return None;
        }
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
                if i == j {
                    let d = self.get(i, i) - s;
                    if !(d > 0.0) {
                        return None;
                    }
                    l.set(i, j, libm::sqrt(d));
                } else {
                    l.set(i, j, (self.get(i, j) - s) / l.get(j, j));
                }
            }
        }
        Some(l)
    }

    /// Solve `L x = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n_rows;
        let mut x = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.get(i, k) * x[k]).sum();
            x[i] = (b[i] - s) / self.get(i, i);
        }
        x
    }

    /// Solve `L^T x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n_rows;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.get(k, i) * x[k]).sum();
            x[i] = (b[i] - s) / self.get(i, i);
        }
        x
    }
}
