//! Dense complex-matrix kernel: arithmetic, Hermitian/positive-definite
//! predicates, partial-pivoting solves and the matrix exponential.
//!
//! Everything downstream stores its N×N quantities as [`CMatrix`]. Matrices
//! are immutable values; all operations return fresh matrices, so they are
//! freely shareable across threads.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = Complex64::new(e, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        assert!(r > 0, "empty matrix");
        let c = rows[0].len();
        assert!(c > 0 && rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        CMatrix::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Max-absolute-entry norm. All tolerance checks in this crate are
    /// expressed relative to this norm so they stay scale-free.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm_max() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.norm_max().max(1.0);
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Hermitian positive-definiteness via Cholesky with pivots required to
    /// exceed `tol * norm_max`.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol.max(1e-10)) {
            return false;
        }
        let n = self.rows;
        let scale = self.norm_max().max(f64::MIN_POSITIVE);
        // Cholesky on the hermitized part.
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k].conj();
                }
                if i == j {
                    let d = sum.re;
                    if d <= tol * scale {
                        return false;
                    }
                    l[i * n + i] = Complex64::new(d.sqrt(), 0.0);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        true
    }

    fn check_same_shape(&self, other: &CMatrix, op: &'static str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                context: op,
                expected: (self.rows, self.cols),
                got: (other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Matrix inverse via [`solve`] against the identity.
    pub fn inverse(&self) -> Result<CMatrix> {
        solve(self, &CMatrix::identity(self.rows))
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

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, other: &CMatrix) -> CMatrix {
        self.check_same_shape(other, "add").expect("shape mismatch in add");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, other: &CMatrix) -> CMatrix {
        self.check_same_shape(other, "sub").expect("shape mismatch in sub");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_re(-1.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Solve `a * x = b` by Gaussian elimination with partial pivoting.
///
/// `b` may have any number of columns. Fails with the offending pivot index
/// when a pivot falls below `1e-14 * norm_max(a)`.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension {
            context: "solve: coefficient matrix must be square",
            expected: (a.rows, a.rows),
            got: (a.rows, a.cols),
        });
    }
    if a.rows != b.rows {
        return Err(Error::Dimension {
            context: "solve: rhs rows must match",
            expected: (a.rows, b.cols),
            got: (b.rows, b.cols),
        });
    }
    let n = a.rows;
    let m = b.cols;
    let pivot_floor = 1e-14 * a.norm_max();
    let mut lu = a.data.clone();
    let mut x = b.data.clone();

    for col in 0..n {
        let mut best = col;
        let mut best_mag = lu[col * n + col].norm();
        for r in col + 1..n {
            let mag = lu[r * n + col].norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag <= pivot_floor {
            return Err(Error::Singular { pivot: col });
        }
        if best != col {
            for j in 0..n {
                lu.swap(col * n + j, best * n + j);
            }
            for j in 0..m {
                x.swap(col * m + j, best * m + j);
            }
        }
        let piv = lu[col * n + col];
        for r in col + 1..n {
            let factor = lu[r * n + col] / piv;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = lu[col * n + j];
                lu[r * n + j] -= factor * v;
            }
            for j in 0..m {
                let v = x[col * m + j];
                x[r * m + j] -= factor * v;
            }
        }
    }
    // back substitution
    for col in (0..n).rev() {
        let piv = lu[col * n + col];
        for j in 0..m {
            let mut s = x[col * m + j];
            for r in col + 1..n {
                s -= lu[col * n + r] * x[r * m + j];
            }
            x[col * m + j] = s / piv;
        }
    }
    Ok(CMatrix { rows: n, cols: m, data: x })
}

/// Matrix exponential by scaling-and-squaring with a fixed [6/6] rational
/// approximant. The input is scaled until its norm is at most 0.5, where the
/// approximant's error sits far below double precision.
pub fn mat_exp(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension {
            context: "mat_exp: input must be square",
            expected: (m.rows, m.rows),
            got: (m.rows, m.cols),
        });
    }
    let n = m.rows;
    // infinity norm for the scaling decision
    let norm = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm <= 0.5 { 0 } else { (norm / 0.5).log2().ceil() as u32 };
    let scaled = m.scale_re(0.5f64.powi(squarings as i32));

    // coefficients c_j = (12-j)! 6! / (12! j! (6-j)!) of the [6/6] approximant
    let mut coeff = [0.0f64; 7];
    coeff[0] = 1.0;
    for j in 1..=6 {
        coeff[j] = coeff[j - 1] * (7 - j) as f64 / ((13 - j) as f64 * j as f64);
    }

    let mut power = CMatrix::identity(n);
    let mut num = CMatrix::identity(n); // sum c_j  A^j
    let mut den = CMatrix::identity(n); // sum c_j (-A)^j
    for (j, &c) in coeff.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = power.scale_re(c);
        num = &num + &term;
        if j % 2 == 0 {
            den = &den + &term;
        } else {
            den = &den - &term;
        }
    }
    let mut result = solve(&den, &num)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}
