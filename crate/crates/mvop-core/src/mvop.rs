//! Monic matrix-valued orthogonal families: moments, construction, norms and
//! three-term recurrence coefficients.
//!
//! Families are built by a Stieltjes-type recurrence: each `P_{n+1}` comes
//! from `x P_n - B(n) P_n - C(n) P_{n-1}` with `B`, `C` computed from inner
//! products of the current polynomials. This keeps every reported quantity
//! stable at the level of quadrature roundoff; the moment-Gram route (solving
//! the block Hankel system per degree) amplifies node-level noise through the
//! conditioning of the monomial basis and survives here only as a test
//! oracle. Construction validates orthogonality, positive-definiteness of the
//! norms and the recurrence residual before returning, and refuses to hand
//! back a family that fails them.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::linalg::{solve, CMatrix};
use crate::quadrature::QuadratureRule;
use crate::weight::{coeff_scale, MatrixPolynomial, WeightSpec};

/// Orthogonality / recurrence residual threshold for a valid family.
pub const FAMILY_TOL: f64 = 1e-9;
/// Node-doubling saturation threshold for moments.
pub const MOMENT_SATURATION_TOL: f64 = 1e-10;

/// Where a family's inner products come from: a pointwise-evaluated weight
/// (quadrature) or a fixed table of moment matrices.
#[derive(Debug, Clone)]
pub enum WeightSource {
    Spec(WeightSpec),
    Moments(Vec<CMatrix>),
}

/// Monic family P_0..P_nmax with norms H_n and recurrence coefficients.
#[derive(Debug, Clone)]
pub struct MvopFamily {
    size: usize,
    nmax: usize,
    t: f64,
    polys: Vec<MatrixPolynomial>,
    norms: Vec<CMatrix>,
    recur_b: Vec<CMatrix>,
    recur_c: Vec<CMatrix>,
    moments: Vec<CMatrix>,
    source: WeightSource,
}

/// Residuals gathered by [`MvopFamily::validate`].
#[derive(Debug, Clone, Copy)]
pub struct FamilyReport {
    pub orthogonality: f64,
    pub recurrence: f64,
    pub norm_hermiticity: f64,
    pub norms_positive_definite: bool,
    pub pass: bool,
}

impl MvopFamily {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn poly(&self, n: usize) -> &MatrixPolynomial {
        &self.polys[n]
    }

    pub fn polys(&self) -> &[MatrixPolynomial] {
        &self.polys
    }

    pub fn norm(&self, n: usize) -> &CMatrix {
        &self.norms[n]
    }

    pub fn norms(&self) -> &[CMatrix] {
        &self.norms
    }

    /// Recurrence coefficients (B, C), both indexed 0..=nmax with C(0) = 0.
    pub fn recurrence(&self) -> (&[CMatrix], &[CMatrix]) {
        (&self.recur_b, &self.recur_c)
    }

    /// Moments of the deformed measure gathered during the build.
    pub fn moments(&self) -> &[CMatrix] {
        &self.moments
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }

    pub fn weight(&self) -> Option<&WeightSpec> {
        match &self.source {
            WeightSource::Spec(w) => Some(w),
            WeightSource::Moments(_) => None,
        }
    }

    pub(crate) fn engine<'a>(&'a self, rule: &'a QuadratureRule) -> Result<InnerEngine<'a>> {
        match &self.source {
            WeightSource::Spec(w) => InnerEngine::from_weight(w, self.t, rule),
            WeightSource::Moments(m) => Ok(InnerEngine::Moments(m)),
        }
    }

    /// Re-checks the family invariants: pairwise orthogonality relative to the
    /// largest norm, Hermitian positive-definite norms, monic leading
    /// coefficients, and the three-term recurrence residual.
    pub fn validate(&self, rule: Option<&QuadratureRule>) -> Result<FamilyReport> {
        let engine = match (&self.source, rule) {
            (WeightSource::Spec(w), Some(r)) => InnerEngine::from_weight(w, self.t, r)?,
            (WeightSource::Spec(_), None) => {
                return Err(Error::Parameter(
                    "validating a quadrature-backed family needs a rule".into(),
                ))
            }
            (WeightSource::Moments(m), _) => InnerEngine::Moments(m),
        };
        self.validate_with(&engine)
    }

    fn validate_with(&self, engine: &InnerEngine<'_>) -> Result<FamilyReport> {
        let h_scale =
            self.norms.iter().map(|h| h.norm_max()).fold(f64::MIN_POSITIVE, f64::max);

        let pairs: Vec<(usize, usize)> =
            (0..=self.nmax).flat_map(|n| (0..n).map(move |m| (n, m))).collect();
        let residuals = map_indexed(pairs.len(), |i| {
            let (n, m) = pairs[i];
            engine.inner(&self.polys[n], &self.polys[m]).map(|v| v.norm_max())
        });
        let mut orthogonality = 0.0f64;
        for r in residuals {
            orthogonality = orthogonality.max(r? / h_scale);
        }

        let mut norm_hermiticity = 0.0f64;
        let mut norms_positive_definite = true;
        for h in &self.norms {
            norm_hermiticity = norm_hermiticity
                .max((h - &h.adjoint()).norm_max() / h.norm_max().max(f64::MIN_POSITIVE));
            norms_positive_definite &= h.is_positive_definite(1e-10);
        }

        let mut recurrence = 0.0f64;
        for n in 0..self.nmax {
            let mut resid = self.polys[n].times_x().sub(&self.polys[n + 1]);
            resid = resid.sub(&self.polys[n].lmul_matrix(&self.recur_b[n]));
            if n >= 1 {
                resid = resid.sub(&self.polys[n - 1].lmul_matrix(&self.recur_c[n]));
            }
            let scale = coeff_scale(&self.polys[n].times_x()).max(1.0);
            recurrence = recurrence.max(crate::weight::coeff_scale(&resid) / scale);
        }

        let pass = orthogonality <= FAMILY_TOL
            && recurrence <= FAMILY_TOL
            && norm_hermiticity <= 1e-10
            && norms_positive_definite;
        Ok(FamilyReport {
            orthogonality,
            recurrence,
            norm_hermiticity,
            norms_positive_definite,
            pass,
        })
    }
}

/// Inner-product backend: weighted quadrature over evaluated polynomials, or
/// bilinear combination of a moment table.
pub(crate) enum InnerEngine<'a> {
    Quad { nodes: &'a [f64], weights: &'a [f64], wvals: Vec<CMatrix> },
    Moments(&'a [CMatrix]),
}

impl<'a> InnerEngine<'a> {
    pub(crate) fn from_weight(
        w: &WeightSpec,
        t: f64,
        rule: &'a QuadratureRule,
    ) -> Result<InnerEngine<'a>> {
        let wvals = weight_values(w, t, rule)?;
        Ok(InnerEngine::Quad { nodes: rule.nodes(), weights: rule.weights(), wvals })
    }

    /// `<p, q> = integral p W q^*` (quadrature) or the equivalent moment sum.
    pub(crate) fn inner(&self, p: &MatrixPolynomial, q: &MatrixPolynomial) -> Result<CMatrix> {
        match self {
            InnerEngine::Quad { nodes, weights, wvals } => {
                let size = p.size();
                let mut acc = CMatrix::zeros(size, size);
                for i in 0..nodes.len() {
                    let pv = p.eval(nodes[i]);
                    let qv = q.eval(nodes[i]);
                    acc = &acc + &(&(&pv * &wvals[i]) * &qv.adjoint()).scale_re(weights[i]);
                }
                Ok(acc)
            }
            InnerEngine::Moments(moments) => inner_product_from_moments(p, q, moments),
        }
    }
}

fn weight_values(w: &WeightSpec, t: f64, rule: &QuadratureRule) -> Result<Vec<CMatrix>> {
    // the rule must carry the same factor convention as the weight: reduced
    // Gaussian-type weights pair with Gauss-Hermite (e^{-x^2} in the rule),
    // finite-support weights with composite Gauss-Legendre on their interval
    match rule.scheme() {
        crate::quadrature::Scheme::GaussHermite if !w.gaussian_reduced() => {
            return Err(Error::Parameter(
                "gauss-hermite rule needs a Gaussian-reduced weight".into(),
            ))
        }
        crate::quadrature::Scheme::CompositeGaussLegendre if w.gaussian_reduced() => {
            return Err(Error::Parameter(
                "a Gaussian-reduced weight needs a gauss-hermite rule".into(),
            ))
        }
        _ => {}
    }
    let nodes = rule.nodes();
    if let (Some(first), Some(last)) = (nodes.first(), nodes.last()) {
        let (lo, hi) = w.support();
        if *first < lo || *last > hi {
            return Err(Error::Parameter(format!(
                "quadrature nodes [{first}, {last}] leave the weight support [{lo}, {hi}]"
            )));
        }
    }
    map_indexed(nodes.len(), |i| w.eval_weight(nodes[i], t)).into_iter().collect()
}

/// Right-divide by a Hermitian(ish) matrix: solves `x * h = m`.
pub(crate) fn div_right(m: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    Ok(solve(&h.adjoint(), &m.adjoint())?.adjoint())
}

/// Signed moments `mu_m = integral x^m W(x;t) dx` for m = 0..=max_power.
///
/// Each moment is required to be Hermitian and to move by at most
/// [`MOMENT_SATURATION_TOL`] (relative to `integral |x|^m |W|`, the natural
/// scale even where the signed moment cancels to zero) when the rule's node
/// count is doubled; violating either aborts with an error rather than
/// returning drifting values.
pub fn compute_moments(
    w: &WeightSpec,
    t: f64,
    max_power: usize,
    rule: &QuadratureRule,
) -> Result<Vec<CMatrix>> {
    let (coarse, scales) = moments_from_values(&weight_values(w, t, rule)?, rule, max_power);
    let doubled = rule.doubled()?;
    let (fine, _) = moments_from_values(&weight_values(w, t, &doubled)?, &doubled, max_power);
    for ((a, b), scale) in coarse.iter().zip(&fine).zip(&scales) {
        let scale = scale.max(f64::MIN_POSITIVE);
        let change = (a - b).norm_max() / scale;
        if change > MOMENT_SATURATION_TOL {
            return Err(Error::Accuracy {
                what: "moment quadrature saturation",
                change,
                tol: MOMENT_SATURATION_TOL,
            });
        }
        let herm = (a - &a.adjoint()).norm_max() / scale;
        if herm > 1e-10 {
            return Err(Error::Consistency {
                what: "moment hermiticity",
                residual: herm,
                tol: 1e-10,
            });
        }
    }
    Ok(coarse)
}

/// Moments plus their absolute-integrand scales `sum w_i |x_i|^m |W_i|`.
fn moments_from_values(
    wvals: &[CMatrix],
    rule: &QuadratureRule,
    max_power: usize,
) -> (Vec<CMatrix>, Vec<f64>) {
    let size = wvals.first().map_or(1, |m| m.rows());
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut moments = vec![CMatrix::zeros(size, size); max_power + 1];
    let mut scales = vec![0.0f64; max_power + 1];
    let mut powers = vec![1.0f64; nodes.len()];
    for (moment, scale) in moments.iter_mut().zip(&mut scales) {
        for i in 0..nodes.len() {
            *moment = &*moment + &wvals[i].scale_re(weights[i] * powers[i]);
            *scale += weights[i] * powers[i].abs() * wvals[i].norm_max();
        }
        for (p, &x) in powers.iter_mut().zip(nodes) {
            *p *= x;
        }
    }
    (moments, scales)
}

/// `<p, q>` by direct quadrature against the deformed weight.
pub fn inner_product(
    p: &MatrixPolynomial,
    q: &MatrixPolynomial,
    w: &WeightSpec,
    t: f64,
    rule: &QuadratureRule,
) -> Result<CMatrix> {
    InnerEngine::from_weight(w, t, rule)?.inner(p, q)
}

/// `<p, q>` as the bilinear moment combination `sum_i p_i mu_{i+j} q_j^*`.
pub fn inner_product_from_moments(
    p: &MatrixPolynomial,
    q: &MatrixPolynomial,
    moments: &[CMatrix],
) -> Result<CMatrix> {
    let need = p.degree() + q.degree() + 1;
    if moments.len() < need {
        return Err(Error::Parameter(format!(
            "moment table too short: need {need}, have {}",
            moments.len()
        )));
    }
    let size = p.size();
    let mut acc = CMatrix::zeros(size, size);
    for (i, pc) in p.coeffs().iter().enumerate() {
        if pc.is_zero(0.0) {
            continue;
        }
        for (j, qc) in q.coeffs().iter().enumerate() {
            if qc.is_zero(0.0) {
                continue;
            }
            acc = &acc + &(&(pc * &moments[i + j]) * &qc.adjoint());
        }
    }
    Ok(acc)
}

/// Builds the monic family for `W(x;t)` up to degree `nmax`.
pub fn build_family(
    w: &WeightSpec,
    t: f64,
    nmax: usize,
    rule: &QuadratureRule,
) -> Result<MvopFamily> {
    let moments = compute_moments(w, t, 2 * nmax + 1, rule)?;
    let engine = InnerEngine::from_weight(w, t, rule)?;
    let fam = build_with_engine(&engine, moments, WeightSource::Spec(w.clone()), t, nmax)?;
    Ok(fam)
}

/// Builds a family directly from a table of moment matrices of the (already
/// deformed) measure. Needs at least `2*nmax + 2` moments.
pub fn build_family_from_moments(
    moments: Vec<CMatrix>,
    t: f64,
    nmax: usize,
) -> Result<MvopFamily> {
    if moments.len() < 2 * nmax + 2 {
        return Err(Error::Parameter(format!(
            "need at least {} moments for nmax = {nmax}, got {}",
            2 * nmax + 2,
            moments.len()
        )));
    }
    let size = moments[0].rows();
    for m in &moments {
        if !m.is_square() || m.rows() != size {
            return Err(Error::Dimension {
                context: "moment table entries must be square and uniform",
                expected: (size, size),
                got: (m.rows(), m.cols()),
            });
        }
    }
    let engine = InnerEngine::Moments(&moments);
    let fam =
        build_with_engine(&engine, moments.clone(), WeightSource::Moments(moments.clone()), t, nmax)?;
    Ok(fam)
}

fn build_with_engine(
    engine: &InnerEngine<'_>,
    moments: Vec<CMatrix>,
    source: WeightSource,
    t: f64,
    nmax: usize,
) -> Result<MvopFamily> {
    let size = moments[0].rows();
    let identity = CMatrix::identity(size);
    let zero = CMatrix::zeros(size, size);

    let mut polys = vec![MatrixPolynomial::constant(identity.clone())];
    let mut norms = vec![engine.inner(&polys[0], &polys[0])?];
    let mut recur_b: Vec<CMatrix> = Vec::with_capacity(nmax + 1);
    let mut recur_c: Vec<CMatrix> = vec![zero.clone()];

    for n in 0..nmax {
        let xpn = polys[n].times_x();
        let b = div_right(&engine.inner(&xpn, &polys[n])?, &norms[n])
            .map_err(|_| ill_conditioned(n, "norm inversion for B(n)"))?;
        let c = if n == 0 {
            zero.clone()
        } else {
            div_right(&engine.inner(&xpn, &polys[n - 1])?, &norms[n - 1])
                .map_err(|_| ill_conditioned(n, "norm inversion for C(n)"))?
        };
        let mut next = xpn.sub(&polys[n].lmul_matrix(&b));
        if n >= 1 {
            next = next.sub(&polys[n - 1].lmul_matrix(&c));
        }
        let h = engine.inner(&next, &next)?;
        recur_b.push(b);
        if n >= 1 {
            recur_c.push(c);
        }
        norms.push(h);
        polys.push(next);
    }

    // top-index coefficients, computable without P_{nmax+1}
    let x_top = polys[nmax].times_x();
    recur_b.push(
        div_right(&engine.inner(&x_top, &polys[nmax])?, &norms[nmax])
            .map_err(|_| ill_conditioned(nmax, "norm inversion for B(nmax)"))?,
    );
    if nmax >= 1 {
        recur_c.push(
            div_right(&engine.inner(&x_top, &polys[nmax - 1])?, &norms[nmax - 1])
                .map_err(|_| ill_conditioned(nmax, "norm inversion for C(nmax)"))?,
        );
    }

    let fam = MvopFamily { size, nmax, t, polys, norms, recur_b, recur_c, moments, source };
    let report = fam.validate_with(engine)?;
    if !report.pass {
        return Err(Error::IllConditioned {
            degree: nmax,
            detail: "family invariants failed after construction",
            residual: report.orthogonality.max(report.recurrence),
        });
    }
    Ok(fam)
}

fn ill_conditioned(degree: usize, detail: &'static str) -> Error {
    Error::IllConditioned { degree, detail, residual: f64::NAN }
}

/// Moments of `e^{-t L(x)} dW` from moments of `dW`, by expanding the
/// exponential series until the terms saturate. Errors out if the provided
/// base moments run out before the series converges.
pub fn deform_moments(
    base_moments: &[CMatrix],
    lambda: &MatrixPolynomial,
    t: f64,
    count: usize,
) -> Result<Vec<CMatrix>> {
    if base_moments.len() < count {
        return Err(Error::Parameter(format!(
            "need at least {count} base moments, got {}",
            base_moments.len()
        )));
    }
    let size = base_moments[0].rows();
    if lambda.size() != size {
        return Err(Error::Dimension {
            context: "deformation symbol size must match moments",
            expected: (size, size),
            got: (lambda.size(), lambda.size()),
        });
    }
    let mut deformed: Vec<CMatrix> = base_moments[..count].to_vec();
    if t == 0.0 {
        return Ok(deformed);
    }

    let identity = MatrixPolynomial::constant(CMatrix::identity(size));
    let mut lam_power = identity;
    let mut factor = 1.0f64; // (-t)^p / p!
    let max_terms = 400usize;
    let mut saturated_runs = 0usize;
    for p in 1..=max_terms {
        lam_power = lam_power.mul(lambda);
        factor *= -t / p as f64;
        let mut term_scale = 0.0f64;
        for (m, out) in deformed.iter_mut().enumerate() {
            let mut term = CMatrix::zeros(size, size);
            for (q, lc) in lam_power.coeffs().iter().enumerate() {
                if lc.is_zero(0.0) {
                    continue;
                }
                let idx = m + q;
                if idx >= base_moments.len() {
                    return Err(Error::Accuracy {
                        what: "moment table exhausted while deforming",
                        change: f64::NAN,
                        tol: MOMENT_SATURATION_TOL,
                    });
                }
                term = &term + &(lc * &base_moments[idx]);
            }
            let term = term.scale_re(factor);
            term_scale =
                term_scale.max(term.norm_max() / out.norm_max().max(1.0));
            *out = &*out + &term;
        }
        if term_scale < 1e-17 {
            saturated_runs += 1;
            if saturated_runs >= 2 {
                return Ok(deformed);
            }
        } else {
            saturated_runs = 0;
        }
    }
    Err(Error::Accuracy {
        what: "deformation series did not converge",
        change: f64::NAN,
        tol: 1e-17,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // the loop index is the lattice index n
mod tests {
    use super::*;
    use crate::hermite::{hermite_weight, HermiteParams};
    use crate::quadrature::{make_gauss_hermite, SQRT_PI};
    use crate::weight::coeff_distance;
    use std::sync::Arc;

    fn scalar_weight(lambda: MatrixPolynomial) -> WeightSpec {
        WeightSpec::new(
            1,
            (f64::NEG_INFINITY, f64::INFINITY),
            Arc::new(|_x| CMatrix::identity(1)),
            true,
            lambda,
            "scalar hermite",
        )
        .unwrap()
    }

    fn lambda_x(size: usize) -> MatrixPolynomial {
        MatrixPolynomial::scalar(size, &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn scalar_moments_match_gaussian_formulas() {
        let w = scalar_weight(lambda_x(1));
        let rule = make_gauss_hermite(12).unwrap();
        let m = compute_moments(&w, 0.0, 4, &rule).unwrap();
        assert!((m[0][(0, 0)].re - SQRT_PI).abs() < 1e-14);
        assert!(m[1][(0, 0)].norm() < 1e-14);
        assert!((m[2][(0, 0)].re - SQRT_PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite2_zeroth_moment() {
        // integral e^{-x^2} e^{xA} e^{xA*} = sqrt(pi) [[1, 0], [0, 3/2]]
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(16).unwrap();
        let m = compute_moments(&w, 0.0, 2, &rule).unwrap();
        let expected = CMatrix::diag(&[SQRT_PI, 1.5 * SQRT_PI]);
        assert!((&m[0] - &expected).norm_max() < 1e-13);
        assert!(m.iter().all(|mm| mm.is_hermitian(1e-10)));
    }

    #[test]
    fn moment_saturation_error_when_rule_too_small() {
        // e^{-t x^2} deformation is not polynomial: 6 nodes cannot saturate
        let w = scalar_weight(MatrixPolynomial::scalar(1, &[0.0, 0.0, 1.0]).unwrap());
        let rule = make_gauss_hermite(6).unwrap();
        match compute_moments(&w, 0.5, 8, &rule) {
            Err(Error::Accuracy { .. }) => {}
            other => panic!("expected saturation error, got {other:?}"),
        }
    }

    #[test]
    fn scalar_family_matches_monic_hermite() {
        let w = scalar_weight(lambda_x(1));
        let rule = make_gauss_hermite(22).unwrap();
        let fam = build_family(&w, 0.0, 6, &rule).unwrap();
        // P_0 = 1, H_0 = sqrt(pi)
        assert_eq!(fam.poly(0).degree(), 0);
        assert!((fam.norm(0)[(0, 0)].re - SQRT_PI).abs() < 1e-13);
        // P_2 = x^2 - 1/2, H_2 = sqrt(pi)/2
        let p2 = fam.poly(2);
        assert!((p2.coeff(0)[(0, 0)].re + 0.5).abs() < 1e-12);
        assert!(p2.coeff(1).norm_max() < 1e-12);
        assert!((p2.coeff(2)[(0, 0)].re - 1.0).abs() == 0.0, "monic leading coefficient");
        assert!((fam.norm(2)[(0, 0)].re - SQRT_PI / 2.0).abs() < 1e-12);
        // H_n = sqrt(pi) n! / 2^n
        let mut expect = SQRT_PI;
        for n in 0..=6 {
            if n > 0 {
                expect *= n as f64 / 2.0;
            }
            assert!((fam.norm(n)[(0, 0)].re - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn scalar_recurrence_b_zero_c_half_n() {
        let w = scalar_weight(lambda_x(1));
        let rule = make_gauss_hermite(22).unwrap();
        let fam = build_family(&w, 0.0, 8, &rule).unwrap();
        let (b, c) = fam.recurrence();
        assert!(c[0].norm_max() == 0.0, "C(0) = 0 by convention");
        for n in 0..=8 {
            assert!(b[n].norm_max() < 1e-12, "B({n})");
            if n >= 1 {
                assert!((c[n][(0, 0)].re - n as f64 / 2.0).abs() < 1e-11, "C({n})");
            }
        }
    }

    #[test]
    fn shifted_scalar_recurrence_under_exponential_deformation() {
        // weight e^{-tx} e^{-x^2}: completing the square shifts x by t/2,
        // so B(n;t) = -t/2 and C(n;t) = n/2
        let w = scalar_weight(lambda_x(1));
        let rule = make_gauss_hermite(48).unwrap();
        for t in [0.3, 1.0] {
            let fam = build_family(&w, t, 6, &rule).unwrap();
            let (b, c) = fam.recurrence();
            for n in 0..=6 {
                assert!((b[n][(0, 0)].re + t / 2.0).abs() < 1e-11, "B({n};{t})");
                if n >= 1 {
                    assert!((c[n][(0, 0)].re - n as f64 / 2.0).abs() < 1e-10, "C({n};{t})");
                }
            }
        }
    }

    #[test]
    fn hermite2_first_polynomial_closed_form() {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(20).unwrap();
        for t in [-0.4, 0.0, 0.8] {
            let fam = build_family(&w, t, 3, &rule).unwrap();
            let expected = crate::hermite::closed_form_p2x2_poly(1, t, 1.0);
            assert!(
                coeff_distance(fam.poly(1), &expected) < 1e-12,
                "t={t}: {:?}",
                fam.poly(1).coeff(0)
            );
        }
    }

    #[test]
    fn family_report_is_clean() {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(20).unwrap();
        let fam = build_family(&w, 0.5, 10, &rule).unwrap();
        let report = fam.validate(Some(&rule)).unwrap();
        assert!(report.pass);
        assert!(report.orthogonality <= 1e-11);
        assert!(report.recurrence <= 1e-11);
        assert!(report.norms_positive_definite);
    }

    #[test]
    fn moment_backed_family_agrees_with_quadrature_build() {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(24).unwrap();
        let nmax = 6;
        let t = 0.25;
        let moments = compute_moments(&w, t, 2 * nmax + 3, &rule).unwrap();
        let from_moments = build_family_from_moments(moments, t, nmax).unwrap();
        let direct = build_family(&w, t, nmax, &rule).unwrap();
        for n in 0..=nmax {
            let d = coeff_distance(from_moments.poly(n), direct.poly(n));
            assert!(d <= 1e-9 * coeff_scale(direct.poly(n)).max(1.0), "n={n}: {d:.2e}");
        }
    }

    #[test]
    fn deformed_moments_match_direct_deformation() {
        // casimir deformation of the 2x2 weight: series-deformed moments vs
        // moments of the deformed weight
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(30).unwrap();
        let t = 0.4;
        let base = compute_moments(&w, 0.0, 40, &rule).unwrap();
        let deformed = deform_moments(&base, w.deformation(), t, 10).unwrap();
        let direct = compute_moments(&w, t, 9, &rule).unwrap();
        for (m, (a, b)) in deformed.iter().zip(&direct).enumerate() {
            let resid = (a - b).norm_max() / b.norm_max().max(1.0);
            assert!(resid < 1e-12, "moment {m}: {resid:.2e}");
        }
    }

    #[test]
    fn gram_construction_oracle_agrees() {
        // independent moment-Gram route: solve the block Hankel system per
        // degree and compare against the recurrence construction
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(20).unwrap();
        let nmax = 8;
        let fam = build_family(&w, 0.5, nmax, &rule).unwrap();
        let moments = fam.moments();
        let size = 2;
        for n in 1..=nmax {
            // gram[i][j] = mu_{i+j}, rhs block j = -mu_{n+j}; solve M X* = R*
            let mut gram = CMatrix::zeros(n * size, n * size);
            let mut rhs = CMatrix::zeros(n * size, size);
            for i in 0..n {
                for j in 0..n {
                    for r in 0..size {
                        for c in 0..size {
                            gram[(i * size + r, j * size + c)] = moments[i + j][(r, c)];
                        }
                    }
                }
            }
            for j in 0..n {
                let blk = moments[n + j].adjoint().scale_re(-1.0);
                for r in 0..size {
                    for c in 0..size {
                        rhs[(j * size + r, c)] = blk[(r, c)];
                    }
                }
            }
            let solved = solve(&gram, &rhs).unwrap();
            let mut coeffs = Vec::with_capacity(n + 1);
            for i in 0..n {
                let mut blk = CMatrix::zeros(size, size);
                for r in 0..size {
                    for c in 0..size {
                        blk[(r, c)] = solved[(i * size + r, c)];
                    }
                }
                coeffs.push(blk.adjoint());
            }
            coeffs.push(CMatrix::identity(size));
            let gram_poly = MatrixPolynomial::new(coeffs).unwrap();
            let d = coeff_distance(&gram_poly, fam.poly(n));
            assert!(d <= 1e-8 * coeff_scale(fam.poly(n)).max(1.0), "n={n}: {d:.2e}");
        }
    }

    #[test]
    fn finite_support_family_via_composite_legendre() {
        // flat weight on [-1, 1]: monic Legendre polynomials
        let w = WeightSpec::new(
            1,
            (-1.0, 1.0),
            Arc::new(|_x| CMatrix::identity(1)),
            false,
            MatrixPolynomial::zero(1),
            "legendre",
        )
        .unwrap();
        let rule = crate::quadrature::make_composite_gauss_legendre(10, 3, -1.0, 1.0).unwrap();
        let fam = build_family(&w, 0.0, 4, &rule).unwrap();
        // P_2 = x^2 - 1/3, P_3 = x^3 - (3/5) x
        assert!((fam.poly(2).coeff(0)[(0, 0)].re + 1.0 / 3.0).abs() < 1e-13);
        assert!((fam.poly(3).coeff(1)[(0, 0)].re + 0.6).abs() < 1e-13);
        // H_0 = 2, H_1 = 2/3, H_2 = 8/45
        assert!((fam.norm(0)[(0, 0)].re - 2.0).abs() < 1e-13);
        assert!((fam.norm(1)[(0, 0)].re - 2.0 / 3.0).abs() < 1e-13);
        assert!((fam.norm(2)[(0, 0)].re - 8.0 / 45.0).abs() < 1e-13);
    }

    #[test]
    fn rule_and_weight_conventions_must_match() {
        let w = scalar_weight(lambda_x(1)); // gaussian-reduced
        let gl = crate::quadrature::make_composite_gauss_legendre(8, 2, -1.0, 1.0).unwrap();
        assert!(matches!(build_family(&w, 0.0, 3, &gl), Err(Error::Parameter(_))));

        let flat = WeightSpec::new(
            1,
            (-1.0, 1.0),
            Arc::new(|_x| CMatrix::identity(1)),
            false,
            MatrixPolynomial::zero(1),
            "flat",
        )
        .unwrap();
        let gh = make_gauss_hermite(8).unwrap();
        assert!(matches!(build_family(&flat, 0.0, 3, &gh), Err(Error::Parameter(_))));
    }

    #[test]
    fn c_equals_norm_ratio() {
        // C(n) H_{n-1} = H_n, the standard norm-ratio identity
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(20).unwrap();
        let fam = build_family(&w, 0.3, 8, &rule).unwrap();
        let (_, c) = fam.recurrence();
        for n in 1..=8 {
            let lhs = &c[n] * fam.norm(n - 1);
            let resid = (&lhs - fam.norm(n)).norm_max() / fam.norm(n).norm_max();
            assert!(resid < 1e-10, "n={n}: {resid:.2e}");
        }
    }
}
