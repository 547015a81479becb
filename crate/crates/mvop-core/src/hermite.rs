//! Hermite-type matrix weights `e^{-x^2} e^{xA} e^{xA*}` with the nilpotent
//! single-subdiagonal A, their Casimir symbol `J - xA`, and the closed forms
//! available in the 2x2 case. These closed forms are the library's analytic
//! ground truth: everything the numerical pipeline produces for this family
//! is checked against them.
//!
//! Scalar Hermite polynomials here follow the physicists' convention
//! (H_0 = 1, H_1 = 2x); the 2x2 closed form carries the matching 2^n
//! prefactor on the monic polynomials.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::mvop::build_family;
use crate::quadrature::QuadratureRule;
use crate::weight::{coeff_distance, coeff_scale, MatrixPolynomial, WeightSpec};

/// Parameters of the Hermite-type weight: block size N and the N-1
/// subdiagonal entries of A.
#[derive(Debug, Clone)]
pub struct HermiteParams {
    size: usize,
    a: Vec<f64>,
}

impl HermiteParams {
    pub fn new(size: usize, a: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter("hermite weight needs N >= 1".into()));
        }
        if a.len() != size - 1 {
            return Err(Error::Parameter(format!(
                "hermite weight with N = {size} needs {} subdiagonal parameters, got {}",
                size - 1,
                a.len()
            )));
        }
        Ok(HermiteParams { size, a })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Parameters with every a_j scaled by a common factor.
    pub fn scaled(&self, factor: f64) -> HermiteParams {
        HermiteParams { size: self.size, a: self.a.iter().map(|&v| v * factor).collect() }
    }

    /// The nilpotent matrix A with `A[j][j-1] = a_j`.
    pub fn matrix_a(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for (i, &v) in self.a.iter().enumerate() {
            m[(i + 1, i)] = num_complex::Complex64::new(v, 0.0);
        }
        m
    }

    /// J = diag(1, ..., N).
    pub fn matrix_j(&self) -> CMatrix {
        CMatrix::diag(&(1..=self.size).map(|i| i as f64).collect::<Vec<_>>())
    }

    /// e^{xA}: the exponential series terminates because A^N = 0.
    pub fn nilpotent_exp(&self, x: f64) -> CMatrix {
        let a = self.matrix_a();
        let mut acc = CMatrix::identity(self.size);
        let mut power = CMatrix::identity(self.size);
        let mut fact = 1.0;
        for p in 1..self.size {
            power = &power * &a;
            fact *= p as f64;
            acc = &acc + &power.scale_re(x.powi(p as i32) / fact);
        }
        acc
    }
}

/// The Hermite-type weight on the real line, Gaussian factor reduced, with
/// the Casimir symbol installed as the default deformation.
pub fn hermite_weight(p: &HermiteParams) -> WeightSpec {
    let params = p.clone();
    let base: Arc<dyn Fn(f64) -> CMatrix + Send + Sync> = Arc::new(move |x: f64| {
        let e = params.nilpotent_exp(x);
        &e * &e.adjoint()
    });
    WeightSpec::new(
        p.size,
        (f64::NEG_INFINITY, f64::INFINITY),
        base,
        true,
        casimir(p),
        format!("hermite N={} a={:?}", p.size, p.a),
    )
    .expect("hermite weight parameters are validated")
}

/// Casimir symbol `J - xA`, degree one (constant for N = 1).
pub fn casimir(p: &HermiteParams) -> MatrixPolynomial {
    let j = p.matrix_j();
    let minus_a = p.matrix_a().scale_re(-1.0);
    if p.size == 1 {
        return MatrixPolynomial::constant(j);
    }
    MatrixPolynomial::new(vec![j, minus_a]).expect("casimir coefficients are square")
}

/// diag(e^{s*1}, ..., e^{s*N}).
pub fn exp_j(p: &HermiteParams, s: f64) -> CMatrix {
    CMatrix::diag(&(1..=p.size).map(|i| (s * i as f64).exp()).collect::<Vec<_>>())
}

/// Closed form of the deformed weight, `e^{xA} e^{-tJ} e^{xA*}` (reduced;
/// the Gaussian factor is carried by the quadrature rule).
pub fn deformed_weight_closed(p: &HermiteParams, x: f64, t: f64) -> CMatrix {
    let e = p.nilpotent_exp(x);
    &(&e * &exp_j(p, -t)) * &e.adjoint()
}

/// Physicists' Hermite polynomial H_n(x).
pub fn hermite_h(n: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    let mut h1 = 2.0 * x;
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * (k as f64) * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Coefficients of H_n in the monomial basis (index = power of x).
pub fn hermite_h_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (j, &c) in cur.iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, &c) in prev.iter().enumerate() {
            next[j] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn p2x2_matrices(n: usize, t: f64, a: f64) -> (CMatrix, CMatrix) {
    let em = (-t).exp();
    let den = n as f64 * a * a + 2.0 * em;
    let m1 = CMatrix::from_real_rows(&[&[0.0, 2.0 / den], &[1.0, 0.0]]);
    let m2 = CMatrix::from_real_rows(&[&[2.0 * a * a / den, 0.0], &[0.0, 0.0]]);
    (m1, m2)
}

/// The 2x2 monic polynomial P_n(x;t) in closed form:
/// `2^n P_n = H_n I - n a M1 H_{n-1} + n(n-1) M2 H_{n-2}` with the rational
/// matrices M1, M2 of the deformed family.
pub fn closed_form_p2x2(n: usize, x: f64, t: f64, a: f64) -> CMatrix {
    let (m1, m2) = p2x2_matrices(n, t, a);
    let nf = n as f64;
    let mut val = CMatrix::identity(2).scale_re(hermite_h(n, x));
    if n >= 1 {
        val = &val - &m1.scale_re(nf * a * hermite_h(n - 1, x));
    }
    if n >= 2 {
        val = &val + &m2.scale_re(nf * (nf - 1.0) * hermite_h(n - 2, x));
    }
    val.scale_re(0.5f64.powi(n as i32))
}

/// Same closed form as a coefficient-list polynomial.
pub fn closed_form_p2x2_poly(n: usize, t: f64, a: f64) -> MatrixPolynomial {
    let (m1, m2) = p2x2_matrices(n, t, a);
    let nf = n as f64;
    let mut coeffs = vec![CMatrix::zeros(2, 2); n + 1];
    for (j, &c) in hermite_h_coeffs(n).iter().enumerate() {
        coeffs[j] = &coeffs[j] + &CMatrix::identity(2).scale_re(c);
    }
    if n >= 1 {
        for (j, &c) in hermite_h_coeffs(n - 1).iter().enumerate() {
            coeffs[j] = &coeffs[j] - &m1.scale_re(nf * a * c);
        }
    }
    if n >= 2 {
        for (j, &c) in hermite_h_coeffs(n - 2).iter().enumerate() {
            coeffs[j] = &coeffs[j] + &m2.scale_re(nf * (nf - 1.0) * c);
        }
    }
    let scale = 0.5f64.powi(n as i32);
    MatrixPolynomial::new(coeffs.into_iter().map(|c| c.scale_re(scale)).collect())
        .expect("closed-form coefficients are square")
}

/// Closed-form bands (G_1, G_0, G_{-1}) of the Casimir difference operator
/// for the 2x2 family.
pub fn closed_form_g2x2(n: usize, t: f64, a: f64) -> (CMatrix, CMatrix, CMatrix) {
    let em = (-t).exp();
    let nf = n as f64;
    let g1 = CMatrix::from_real_rows(&[&[0.0, 0.0], &[-a, 0.0]]);
    let g0 = CMatrix::diag(&[
        2.0 * (nf * a * a + em) / (nf * a * a + 2.0 * em),
        ((nf + 1.0) * a * a + 4.0 * em) / ((nf + 1.0) * a * a + 2.0 * em),
    ]);
    let gm1 = CMatrix::from_real_rows(&[
        &[0.0, -2.0 * nf * a * em / (nf * a * a + 2.0 * em).powi(2)],
        &[0.0, 0.0],
    ]);
    (g1, g0, gm1)
}

/// Bands of the Casimir operator expressed through the recurrence
/// coefficients: `G_1 = -A`, `G_0(n) = n + J - 2C(n) - A B(n)`,
/// `G_{-1}(n) = C(n) A - 2 C(n) B(n-1)`.
pub fn g_from_recurrence(
    b: &[CMatrix],
    c: &[CMatrix],
    a: &CMatrix,
    j: &CMatrix,
    n: usize,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    if n >= b.len() || n >= c.len() {
        return Err(Error::Parameter(format!(
            "g_from_recurrence: n = {n} out of range (have {} recurrence coefficients)",
            b.len()
        )));
    }
    let size = j.rows();
    let g1 = a.scale_re(-1.0);
    let n_plus_j = &CMatrix::identity(size).scale_re(n as f64) + j;
    let g0 = &(&n_plus_j - &c[n].scale_re(2.0)) - &(a * &b[n]);
    let gm1 = if n == 0 {
        CMatrix::zeros(size, size)
    } else {
        &(&c[n] * a) - &(&c[n] * &b[n - 1]).scale_re(2.0)
    };
    Ok((g1, g0, gm1))
}

/// Report of the rescaling identities: the deformed weight factors through
/// the parameter change a -> e^{t/2} a conjugated by e^{-(t/2)J}, and the
/// deformed polynomials and recurrence coefficients conjugate the same way.
#[derive(Debug, Clone, Copy)]
pub struct FactorizationReport {
    pub weight_residual: f64,
    pub poly_residual: f64,
    pub recurrence_residual: f64,
    pub pass: bool,
}

pub const FACTORIZATION_WEIGHT_TOL: f64 = 1e-11;
pub const FACTORIZATION_POLY_TOL: f64 = 1e-9;

/// Verifies `W(x;t) = e^{-(t/2)J} W^{(a')}(x) e^{-(t/2)J}` pointwise and
/// `P_n(x;t) = e^{-(t/2)J} P_n^{(a')}(x) e^{(t/2)J}` (plus the analogous
/// recurrence-coefficient identities) with `a' = e^{t/2} a`, by building the
/// deformed and rescaled families independently.
pub fn rescaled_factorization_check(
    p: &HermiteParams,
    t: f64,
    sample_xs: &[f64],
    nmax: usize,
    rule: &QuadratureRule,
) -> Result<FactorizationReport> {
    let scaled = p.scaled((t / 2.0).exp());
    let conj_neg = exp_j(p, -t / 2.0);
    let conj_pos = exp_j(p, t / 2.0);

    let mut weight_residual = 0.0f64;
    for &x in sample_xs {
        let lhs = deformed_weight_closed(p, x, t);
        let base_scaled = {
            let e = scaled.nilpotent_exp(x);
            &e * &e.adjoint()
        };
        let rhs = &(&conj_neg * &base_scaled) * &conj_neg;
        let resid = (&lhs - &rhs).norm_max() / lhs.norm_max().max(1.0);
        weight_residual = weight_residual.max(resid);
    }

    let deformed = build_family(&hermite_weight(p), t, nmax, rule)?;
    let rescaled = build_family(&hermite_weight(&scaled), 0.0, nmax, rule)?;

    let mut poly_residual = 0.0f64;
    for n in 0..=nmax {
        let conjugated = rescaled.poly(n).lmul_matrix(&conj_neg).rmul_matrix(&conj_pos);
        let scale = coeff_scale(deformed.poly(n)).max(1.0);
        poly_residual =
            poly_residual.max(coeff_distance(deformed.poly(n), &conjugated) / scale);
    }

    let (b_def, c_def) = deformed.recurrence();
    let (b_res, c_res) = rescaled.recurrence();
    let mut recurrence_residual = 0.0f64;
    for n in 0..=nmax {
        for (lhs, rhs) in [(&b_def[n], &b_res[n]), (&c_def[n], &c_res[n])] {
            let conj = &(&conj_neg * rhs) * &conj_pos;
            let resid = (lhs - &conj).norm_max() / lhs.norm_max().max(1.0);
            recurrence_residual = recurrence_residual.max(resid);
        }
    }

    Ok(FactorizationReport {
        weight_residual,
        poly_residual,
        recurrence_residual,
        pass: weight_residual <= FACTORIZATION_WEIGHT_TOL
            && poly_residual <= FACTORIZATION_POLY_TOL
            && recurrence_residual <= FACTORIZATION_POLY_TOL,
    })
}
