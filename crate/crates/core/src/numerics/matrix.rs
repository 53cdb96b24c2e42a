//! Small dense square matrices.
//!
//! Three roles are distinguished at the type level: [`SquareMatrix`] for
//! general matrices, [`SymMatrix`] and [`SkewMatrix`] whose storage makes the
//! (anti)symmetry exact.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `n × n` matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix dimension");
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &SquareMatrix) -> SquareMatrix {
        &(self * other) - &(other * self)
    }

    /// `Qᵀ · self · Q`.
    pub fn conjugate_by(&self, q: &SquareMatrix) -> SquareMatrix {
        &(&q.transpose() * self) * q
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap();
            if a[pivot * n + k] == 0.0 {
                return 0.0;
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                det = -det;
            }
            let akk = a[k * n + k];
            det *= akk;
            for i in k + 1..n {
                let factor = a[i * n + k] / akk;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= factor * a[k * n + j];
                    }
                }
            }
        }
        det
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Skew part `(A − Aᵀ)/2`.
    pub fn skew_part(&self) -> SkewMatrix {
        SkewMatrix::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] - self[(j, i)]))
    }

    /// `‖AᵀA − I‖_F`, the distance from orthogonality.
    pub fn orthogonality_defect(&self) -> f64 {
        (&(&self.transpose() * self) - &SquareMatrix::identity(self.n)).frobenius_norm()
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions must agree");
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions must agree");
        SquareMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions must agree");
        SquareMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n.max(1))).finish()
    }
}

/// Symmetric matrix; only constructors that produce exact symmetry exist.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct SymMatrix(SquareMatrix);

impl SymMatrix {
    /// Builds from `f(i, j)` evaluated on the upper triangle `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self(SquareMatrix::from_diagonal(d))
    }

    pub fn identity(n: usize) -> Self {
        Self(SquareMatrix::identity(n))
    }

    /// Accepts `rows` only if it is exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SquareMatrix::from_rows(rows)?.try_into()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// `self + s·I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.dim() {
            m[(i, i)] += s;
        }
        Self(m)
    }

    pub fn square(&self) -> Self {
        (&self.0 * &self.0).symmetric_part()
    }

    /// Whether the matrix is diagonal (all off-diagonal entries exactly zero).
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }
}

impl TryFrom<SquareMatrix> for SymMatrix {
    type Error = Error;
    fn try_from(m: SquareMatrix) -> Result<Self> {
        let n = m.dim();
        let mut deviation: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                deviation = deviation.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if deviation > 0.0 {
            return Err(Error::NotStructured { kind: "symmetric", deviation });
        }
        Ok(Self(m))
    }
}

impl From<SymMatrix> for SquareMatrix {
    fn from(s: SymMatrix) -> Self {
        s.0
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.0)
    }
}

/// Skew-symmetric matrix with an exactly zero diagonal.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct SkewMatrix(SquareMatrix);

impl SkewMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(SquareMatrix::zeros(n))
    }

    /// Builds from `f(i, j)` evaluated on the strict upper triangle `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Self(m)
    }

    /// Builds from the strict upper triangle packed row by row.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: upper.len() });
        }
        let mut it = upper.iter();
        Ok(Self::from_fn(n, |_, _| *it.next().unwrap()))
    }

    /// Strict upper triangle packed row by row.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SquareMatrix::from_rows(rows)?.try_into()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// `Qᵀ · self · Q`, re-projected onto the skew matrices.
    pub fn conjugate_by(&self, q: &SquareMatrix) -> Self {
        self.0.conjugate_by(q).skew_part()
    }
}

impl TryFrom<SquareMatrix> for SkewMatrix {
    type Error = Error;
    fn try_from(m: SquareMatrix) -> Result<Self> {
        let n = m.dim();
        let mut deviation: f64 = 0.0;
        for i in 0..n {
            deviation = deviation.max(m[(i, i)].abs());
            for j in i + 1..n {
                deviation = deviation.max((m[(i, j)] + m[(j, i)]).abs());
            }
        }
        if deviation > 0.0 {
            return Err(Error::NotStructured { kind: "skew-symmetric", deviation });
        }
        Ok(Self(m))
    }
}

impl From<SkewMatrix> for SquareMatrix {
    fn from(s: SkewMatrix) -> Self {
        s.0
    }
}

impl Index<(usize, usize)> for SkewMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

impl fmt::Debug for SkewMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Skew{:?}", self.0)
    }
}

/// Solves the dense system `a · x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
pub fn solve_dense(a: &SquareMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut m = a.as_slice().to_vec();
    let mut x = b.to_vec();
    let scale = a.max_abs();
    for k in 0..n {
        let pivot = (k..n).max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))?;
        if m[pivot * n + k].abs() <= f64::EPSILON * scale * n as f64 {
            return None;
        }
        if pivot != k {
            for j in 0..n {
                m.swap(k * n + j, pivot * n + j);
            }
            x.swap(k, pivot);
        }
        for i in k + 1..n {
            let factor = m[i * n + k] / m[k * n + k];
            if factor != 0.0 {
                for j in k..n {
                    m[i * n + j] -= factor * m[k * n + j];
                }
                x[i] -= factor * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|j| m[k * n + j] * x[j]).sum();
        x[k] = (x[k] - tail) / m[k * n + k];
    }
    Some(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
