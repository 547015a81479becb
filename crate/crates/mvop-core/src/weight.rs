//! Matrix weights `W(x;t) = e^{-t L(x)} W(x)` and the zero-order symmetry
//! class that makes such deformations well-defined: a matrix polynomial
//! `L(x)` qualifies when `L(x) W(x) = W(x) L(x)^*` on the support.

use std::fmt;
use std::sync::Arc;


use crate::error::{Error, Result};
use crate::linalg::{mat_exp, CMatrix};

/// Residual threshold for the zero-order symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Polynomial with N x N matrix coefficients, `coeffs[k]` multiplying x^k.
#[derive(Clone)]
pub struct MatrixPolynomial {
    size: usize,
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("matrix polynomial needs at least one coefficient".into()));
        }
        let size = coeffs[0].rows();
        for c in &coeffs {
            if c.rows() != size || c.cols() != size {
                return Err(Error::Dimension {
                    context: "matrix polynomial coefficients must be square and uniform",
                    expected: (size, size),
                    got: (c.rows(), c.cols()),
                });
            }
        }
        let mut p = MatrixPolynomial { size, coeffs };
        p.trim();
        Ok(p)
    }

    pub fn zero(size: usize) -> Self {
        MatrixPolynomial { size, coeffs: vec![CMatrix::zeros(size, size)] }
    }

    pub fn constant(m: CMatrix) -> Self {
        assert!(m.is_square());
        MatrixPolynomial { size: m.rows(), coeffs: vec![m] }
    }

    /// Scalar polynomial `sum c_j x^j` times the identity.
    pub fn scalar(size: usize, coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("scalar polynomial needs coefficients".into()));
        }
        MatrixPolynomial::new(
            coeffs.iter().map(|&c| CMatrix::identity(size).scale_re(c)).collect(),
        )
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().is_zero(0.0) {
            self.coeffs.pop();
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero(0.0)
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// Coefficient of x^k, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> CMatrix {
        self.coeffs.get(k).cloned().unwrap_or_else(|| CMatrix::zeros(self.size, self.size))
    }

    pub fn leading(&self) -> &CMatrix {
        self.coeffs.last().unwrap()
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, x: f64) -> CMatrix {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = &acc.scale_re(x) + c;
        }
        acc
    }

    pub fn add(&self, other: &MatrixPolynomial) -> MatrixPolynomial {
        assert_eq!(self.size, other.size);
        let len = self.coeffs.len().max(other.coeffs.len());
        let z = CMatrix::zeros(self.size, self.size);
        let coeffs = (0..len)
            .map(|k| {
                let a = self.coeffs.get(k).unwrap_or(&z);
                let b = other.coeffs.get(k).unwrap_or(&z);
                a + b
            })
            .collect();
        let mut p = MatrixPolynomial { size: self.size, coeffs };
        p.trim();
        p
    }

    pub fn sub(&self, other: &MatrixPolynomial) -> MatrixPolynomial {
        self.add(&other.scale_re(-1.0))
    }

    pub fn scale_re(&self, s: f64) -> MatrixPolynomial {
        MatrixPolynomial {
            size: self.size,
            coeffs: self.coeffs.iter().map(|c| c.scale_re(s)).collect(),
        }
    }

    /// Product in evaluation order: `(self * other)(x) = self(x) * other(x)`.
    /// Coefficient order matters; matrix coefficients do not commute.
    pub fn mul(&self, other: &MatrixPolynomial) -> MatrixPolynomial {
        assert_eq!(self.size, other.size);
        let mut coeffs =
            vec![CMatrix::zeros(self.size, self.size); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero(0.0) {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = &coeffs[i + j] + &(a * b);
            }
        }
        let mut p = MatrixPolynomial { size: self.size, coeffs };
        p.trim();
        p
    }

    /// Multiplication by x (degree shift).
    pub fn times_x(&self) -> MatrixPolynomial {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(CMatrix::zeros(self.size, self.size));
        coeffs.extend(self.coeffs.iter().cloned());
        MatrixPolynomial { size: self.size, coeffs }
    }

    /// Left-multiply every coefficient by a constant matrix.
    pub fn lmul_matrix(&self, m: &CMatrix) -> MatrixPolynomial {
        let mut p = MatrixPolynomial {
            size: self.size,
            coeffs: self.coeffs.iter().map(|c| m * c).collect(),
        };
        p.trim();
        p
    }

    /// Right-multiply every coefficient by a constant matrix.
    pub fn rmul_matrix(&self, m: &CMatrix) -> MatrixPolynomial {
        let mut p = MatrixPolynomial {
            size: self.size,
            coeffs: self.coeffs.iter().map(|c| c * m).collect(),
        };
        p.trim();
        p
    }
}

impl fmt::Debug for MatrixPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixPolynomial(size={}, degree={})", self.size, self.degree())
    }
}

/// Max-norm distance between coefficient lists (zero-padded to equal length).
pub fn coeff_distance(a: &MatrixPolynomial, b: &MatrixPolynomial) -> f64 {
    let len = a.coeffs.len().max(b.coeffs.len());
    (0..len).map(|k| (&a.coeff(k) - &b.coeff(k)).norm_max()).fold(0.0, f64::max)
}

/// Largest coefficient norm, used as the scale for relative comparisons.
pub fn coeff_scale(a: &MatrixPolynomial) -> f64 {
    a.coeffs.iter().map(|c| c.norm_max()).fold(0.0, f64::max)
}

/// `sum v_j L(x)^j` with real `v_j`, expanded by matrix-polynomial products.
pub fn compose_v_of_lambda(lambda: &MatrixPolynomial, v_coeffs: &[f64]) -> Result<MatrixPolynomial> {
    if v_coeffs.is_empty() {
        return Err(Error::Parameter("composition polynomial needs coefficients".into()));
    }
    let n = lambda.size();
    let mut acc = MatrixPolynomial::constant(CMatrix::identity(n).scale_re(v_coeffs[0]));
    let mut power = MatrixPolynomial::constant(CMatrix::identity(n));
    for &v in &v_coeffs[1..] {
        power = power.mul(lambda);
        if v != 0.0 {
            acc = acc.add(&power.scale_re(v));
        }
    }
    Ok(acc)
}

/// A matrix weight: evaluator for the (possibly Gaussian-reduced) base
/// together with its support and the deformation symbol `L(x)`.
///
/// When `gaussian_reduced` is set the evaluator returns the weight with the
/// e^{-x^2} factor removed; that factor then lives in the Gauss-Hermite rule
/// so quadrature sees polynomial integrands.
#[derive(Clone)]
pub struct WeightSpec {
    size: usize,
    support: (f64, f64),
    base_eval: Arc<dyn Fn(f64) -> CMatrix + Send + Sync>,
    gaussian_reduced: bool,
    deformation: MatrixPolynomial,
    description: String,
}

impl WeightSpec {
    pub fn new(
        size: usize,
        support: (f64, f64),
        base_eval: Arc<dyn Fn(f64) -> CMatrix + Send + Sync>,
        gaussian_reduced: bool,
        deformation: MatrixPolynomial,
        description: impl Into<String>,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter("weight size must be positive".into()));
        }
        if support.0 >= support.1 || support.0.is_nan() || support.1.is_nan() {
            return Err(Error::Parameter(format!(
                "weight support must be an interval, got [{}, {}]",
                support.0, support.1
            )));
        }
        if deformation.size() != size {
            return Err(Error::Dimension {
                context: "deformation symbol size must match weight",
                expected: (size, size),
                got: (deformation.size(), deformation.size()),
            });
        }
        Ok(WeightSpec {
            size,
            support,
            base_eval,
            gaussian_reduced,
            deformation,
            description: description.into(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn gaussian_reduced(&self) -> bool {
        self.gaussian_reduced
    }

    pub fn deformation(&self) -> &MatrixPolynomial {
        &self.deformation
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Same weight with a different deformation symbol.
    pub fn with_deformation(&self, deformation: MatrixPolynomial) -> Result<Self> {
        let mut w = self.clone();
        if deformation.size() != self.size {
            return Err(Error::Dimension {
                context: "deformation symbol size must match weight",
                expected: (self.size, self.size),
                got: (deformation.size(), deformation.size()),
            });
        }
        w.deformation = deformation;
        Ok(w)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x < self.support.0 || x > self.support.1 {
            return Err(Error::Domain { x, lo: self.support.0, hi: self.support.1 });
        }
        Ok(())
    }

    /// Undeformed (reduced) base weight at x.
    pub fn eval_base(&self, x: f64) -> Result<CMatrix> {
        self.check_domain(x)?;
        Ok((self.base_eval)(x))
    }

    /// Deformed weight `e^{-t L(x)} W(x)` at x (reduced form when the
    /// Gaussian flag is set).
    pub fn eval_weight(&self, x: f64, t: f64) -> Result<CMatrix> {
        self.check_domain(x)?;
        let base = (self.base_eval)(x);
        if t == 0.0 {
            return Ok(base);
        }
        let exponent = self.deformation.eval(x).scale_re(-t);
        Ok(&mat_exp(&exponent)? * &base)
    }

    /// Chebyshev-distributed sample points on the support (clipped to
    /// [-4, 4] when infinite), for pointwise identity checks.
    pub fn sample_points(&self, count: usize) -> Vec<f64> {
        let lo = self.support.0.max(-4.0);
        let hi = self.support.1.min(4.0);
        chebyshev_points(lo, hi, count)
    }
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "WeightSpec({}, size={}, support=[{}, {}], reduced={}, deg L={})",
            self.description,
            self.size,
            self.support.0,
            self.support.1,
            self.gaussian_reduced,
            self.deformation.degree()
        )
    }
}

pub fn chebyshev_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..count)
        .map(|i| {
            let theta = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * count as f64);
            mid + half * theta.cos()
        })
        .collect()
}

/// Outcome of the zero-order symmetry check.
#[derive(Debug, Clone, Copy)]
pub struct SymmetryReport {
    /// Max relative residual of `L W - W L^*` at the requested t.
    pub max_residual: f64,
    /// Same residual at t = 0 (symmetry of the undeformed weight).
    pub base_residual: f64,
    pub pass: bool,
}

/// Checks `L(x) W(x;t) = W(x;t) L(x)^*` at the sample points, both at the
/// requested t and at t = 0. Symmetry at t = 0 must carry over to every t;
/// the report fails if either residual exceeds [`SYMMETRY_TOL`].
pub fn check_zero_order_symmetry(
    lambda: &MatrixPolynomial,
    w: &WeightSpec,
    t: f64,
    sample_xs: &[f64],
) -> Result<SymmetryReport> {
    if lambda.size() != w.size() {
        return Err(Error::Dimension {
            context: "symmetry check: symbol size must match weight",
            expected: (w.size(), w.size()),
            got: (lambda.size(), lambda.size()),
        });
    }
    let mut max_residual = 0.0f64;
    let mut base_residual = 0.0f64;
    for &x in sample_xs {
        let lam = lambda.eval(x);
        for (target, out) in [(t, &mut max_residual), (0.0, &mut base_residual)] {
            let wv = w.eval_weight(x, target)?;
            let lhs = &lam * &wv;
            let rhs = &wv * &lam.adjoint();
            let resid = (&lhs - &rhs).norm_max() / wv.norm_max().max(f64::MIN_POSITIVE);
            *out = out.max(resid);
        }
    }
    Ok(SymmetryReport {
        max_residual,
        base_residual,
        pass: max_residual <= SYMMETRY_TOL && base_residual <= SYMMETRY_TOL,
    })
}
