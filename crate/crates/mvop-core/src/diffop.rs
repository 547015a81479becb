//! The banded difference operator attached to a symmetric zero-order symbol:
//! for `L(x)` of degree k acting on the family by `P_n . L = M(t) . P_n`, the
//! operator `M(t)` has bands `G_j(n;t)`, `j = -k..k`, with
//! `G_j(n) = <P_n L, P_{n+j}> H_{n+j}^{-1}`.
//!
//! Band bookkeeping follows the semi-infinite structure: indices below the
//! bottom are identically zero, while entries above the truncation are
//! *unavailable* and excluded from every residual rather than zeroed. The one
//! exception is the leading band, which is a verified constant and therefore
//! known at every row.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::linalg::CMatrix;
use crate::mvop::{div_right, MvopFamily};
use crate::quadrature::QuadratureRule;
use crate::weight::MatrixPolynomial;

/// Weak-Pearson residual above which construction refuses the operator.
pub const PEARSON_FAIL_TOL: f64 = 1e-7;

/// One band entry: structurally zero, a known matrix, or lost to truncation.
#[derive(Debug, Clone, Copy)]
pub enum BandValue<'a> {
    Zero,
    Known(&'a CMatrix),
    Unavailable,
}

impl<'a> BandValue<'a> {
    pub fn is_known(&self) -> bool {
        !matches!(self, BandValue::Unavailable)
    }
}

/// Banded difference operator `sum_j G_j(n;t) shift^j`.
#[derive(Debug, Clone)]
pub struct BandedDifferenceOperator {
    size: usize,
    bandwidth: usize,
    nmax: usize,
    t: f64,
    /// (2k+1) x (nmax+1) grid, index (j + k) * (nmax + 1) + n. `None` means
    /// unavailable (column beyond the truncation).
    entries: Vec<Option<CMatrix>>,
    /// The constant leading coefficient (equals the symbol's top matrix).
    leading: CMatrix,
    /// Max weak-Pearson residual observed at construction (NaN when the
    /// operator was assembled without norms, e.g. by composition).
    pearson_residual: f64,
}

impl BandedDifferenceOperator {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn leading(&self) -> &CMatrix {
        &self.leading
    }

    pub fn pearson_residual(&self) -> f64 {
        self.pearson_residual
    }

    fn idx(&self, j: i64, n: usize) -> usize {
        (j + self.bandwidth as i64) as usize * (self.nmax + 1) + n
    }

    /// Band value with the semi-infinite conventions: zero below the bottom
    /// or outside the bandwidth, the constant leading coefficient on the top
    /// band at any row, unavailable beyond the truncation otherwise.
    pub fn band(&self, j: i64, n: i64) -> BandValue<'_> {
        let k = self.bandwidth as i64;
        if j.abs() > k || n < 0 || n + j < 0 {
            return BandValue::Zero;
        }
        if j == k {
            if n <= self.nmax as i64 && n + j <= self.nmax as i64 {
                if let Some(Some(v)) = self.entries.get(self.idx(j, n as usize)) {
                    return BandValue::Known(v);
                }
            }
            return BandValue::Known(&self.leading);
        }
        if n > self.nmax as i64 || n + j > self.nmax as i64 {
            return BandValue::Unavailable;
        }
        match &self.entries[self.idx(j, n as usize)] {
            Some(v) => BandValue::Known(v),
            None => BandValue::Unavailable,
        }
    }

    /// Stored entry without the leading-band extension (rows 0..=nmax only).
    pub fn stored(&self, j: i64, n: usize) -> Option<&CMatrix> {
        if j.abs() > self.bandwidth as i64 || n > self.nmax {
            return None;
        }
        self.entries[self.idx(j, n)].as_ref()
    }

    pub(crate) fn set(&mut self, j: i64, n: usize, v: Option<CMatrix>) {
        let i = self.idx(j, n);
        self.entries[i] = v;
    }

    pub(crate) fn blank(
        size: usize,
        bandwidth: usize,
        nmax: usize,
        t: f64,
        leading: CMatrix,
    ) -> Self {
        BandedDifferenceOperator {
            size,
            bandwidth,
            nmax,
            t,
            entries: vec![None; (2 * bandwidth + 1) * (nmax + 1)],
            leading,
            pearson_residual: f64::NAN,
        }
    }

    /// The identity operator (bandwidth 0, every diagonal block I).
    pub fn identity(size: usize, nmax: usize, t: f64) -> Self {
        let mut op = Self::blank(size, 0, nmax, t, CMatrix::identity(size));
        for n in 0..=nmax {
            op.set(0, n, Some(CMatrix::identity(size)));
        }
        op
    }

    pub fn scale_re(&self, s: f64) -> Self {
        BandedDifferenceOperator {
            size: self.size,
            bandwidth: self.bandwidth,
            nmax: self.nmax,
            t: self.t,
            entries: self
                .entries
                .iter()
                .map(|e| e.as_ref().map(|m| m.scale_re(s)))
                .collect(),
            leading: self.leading.scale_re(s),
            pearson_residual: f64::NAN,
        }
    }

    /// Max weak-Pearson residual `|G_l(n) H_{n+l} - H_n G_{-l}(n+l)^*| / |H_n|`
    /// over all available pairs.
    pub fn weak_pearson_residual(&self, norms: &[CMatrix]) -> f64 {
        let k = self.bandwidth as i64;
        let mut worst = 0.0f64;
        for n in 0..=self.nmax {
            for l in -k..=k {
                let (BandValue::Known(g), BandValue::Known(rev)) =
                    (self.band(l, n as i64), self.band(-l, n as i64 + l))
                else {
                    continue;
                };
                let col = n as i64 + l;
                if col < 0 {
                    continue;
                }
                let lhs = g * &norms[col as usize];
                let rhs = &norms[n] * &rev.adjoint();
                let resid = (&lhs - &rhs).norm_max() / norms[n].norm_max().max(f64::MIN_POSITIVE);
                worst = worst.max(resid);
            }
        }
        worst
    }

    /// Copy with `delta` added to one stored band entry. Negative-control
    /// fixture for validation harnesses: a corrupted band must make the
    /// Pearson residual visible.
    pub fn perturbed(&self, j: i64, n: usize, delta: &CMatrix) -> Self {
        let mut out = self.clone();
        if let Some(v) = out.stored(j, n).cloned() {
            out.set(j, n, Some(&v + delta));
        }
        out.pearson_residual = f64::NAN;
        out
    }

    /// Max deviation of the stored top band from the constant leading
    /// coefficient.
    pub fn leading_band_deviation(&self) -> f64 {
        let k = self.bandwidth as i64;
        let scale = self.leading.norm_max().max(1.0);
        let mut worst = 0.0f64;
        for n in 0..=self.nmax {
            if let Some(v) = self.stored(k, n) {
                worst = worst.max((v - &self.leading).norm_max() / scale);
            }
        }
        worst
    }
}

/// Extracts the operator bands `G_j(n;t)` for the symbol `lambda` from a
/// family, then verifies leading-band constancy and the weak Pearson
/// relation before returning.
pub fn compute_g(
    fam: &MvopFamily,
    lambda: &MatrixPolynomial,
    rule: &QuadratureRule,
) -> Result<BandedDifferenceOperator> {
    if lambda.size() != fam.size() {
        return Err(Error::Dimension {
            context: "compute_g: symbol size must match family",
            expected: (fam.size(), fam.size()),
            got: (lambda.size(), lambda.size()),
        });
    }
    let k = lambda.degree();
    if fam.nmax() < k {
        return Err(Error::Parameter(format!(
            "family nmax = {} is smaller than symbol degree {k}",
            fam.nmax()
        )));
    }
    let engine = fam.engine(rule)?;
    let nmax = fam.nmax();
    let mut op =
        BandedDifferenceOperator::blank(fam.size(), k, nmax, fam.t(), lambda.leading().clone());

    // G_j(n) for all rows, parallel over n
    let rows: Vec<Result<Vec<(i64, CMatrix)>>> = map_indexed(nmax + 1, |n| {
        let pl = fam.poly(n).mul(lambda);
        let mut row = Vec::new();
        for j in -(k as i64)..=(k as i64) {
            let col = n as i64 + j;
            if col < 0 || col > nmax as i64 {
                continue;
            }
            let col = col as usize;
            let raw = engine.inner(&pl, fam.poly(col))?;
            row.push((j, div_right(&raw, fam.norm(col))?));
        }
        Ok(row)
    });
    for (n, row) in rows.into_iter().enumerate() {
        for (j, v) in row? {
            op.set(j, n, Some(v));
        }
    }

    let lead_dev = op.leading_band_deviation();
    if lead_dev > 1e-8 {
        return Err(Error::Consistency {
            what: "leading band constancy",
            residual: lead_dev,
            tol: 1e-8,
        });
    }
    let pearson = op.weak_pearson_residual(fam.norms());
    if pearson > PEARSON_FAIL_TOL {
        return Err(Error::Consistency {
            what: "weak Pearson relation (symbol not symmetric, or quadrature inexact)",
            residual: pearson,
            tol: PEARSON_FAIL_TOL,
        });
    }
    op.pearson_residual = pearson;
    Ok(op)
}

/// `sum_j G_j(n) P_{n+j}`, the operator side of `P_n . L = M . P_n`.
pub fn apply(
    op: &BandedDifferenceOperator,
    fam: &MvopFamily,
    n: usize,
) -> Result<MatrixPolynomial> {
    let k = op.bandwidth();
    if n + k > fam.nmax() {
        return Err(Error::Parameter(format!(
            "apply: n = {n} needs P_{} beyond nmax = {}",
            n + k,
            fam.nmax()
        )));
    }
    let mut acc = MatrixPolynomial::zero(op.size());
    for j in -(k as i64)..=(k as i64) {
        match op.band(j, n as i64) {
            BandValue::Zero => {}
            BandValue::Known(g) => {
                let col = (n as i64 + j) as usize;
                acc = acc.add(&fam.poly(col).lmul_matrix(g));
            }
            BandValue::Unavailable => {
                return Err(Error::Parameter(format!(
                    "apply: band {j} unavailable at n = {n}"
                )))
            }
        }
    }
    Ok(acc)
}

/// Operator composition `(m1 . m2)_l(n) = sum_j m1_j(n) m2_{l-j}(n+j)`,
/// with zero short-circuits and unavailability propagation.
pub fn compose(
    m1: &BandedDifferenceOperator,
    m2: &BandedDifferenceOperator,
) -> BandedDifferenceOperator {
    assert_eq!(m1.size(), m2.size(), "operator sizes must match");
    let k1 = m1.bandwidth() as i64;
    let k2 = m2.bandwidth() as i64;
    let k = (k1 + k2) as usize;
    let nmax = m1.nmax().min(m2.nmax());
    let size = m1.size();
    let mut out =
        BandedDifferenceOperator::blank(size, k, nmax, m1.t(), &m1.leading * &m2.leading);
    for l in -(k as i64)..=(k as i64) {
        for n in 0..=nmax {
            if n as i64 + l < 0 {
                continue; // below the bottom boundary, structurally zero
            }
            let mut acc = CMatrix::zeros(size, size);
            let mut available = true;
            for j in (-k1).max(l - k2)..=k1.min(l + k2) {
                let b1 = m1.band(j, n as i64);
                if matches!(b1, BandValue::Zero) {
                    continue;
                }
                let b2 = m2.band(l - j, n as i64 + j);
                if matches!(b2, BandValue::Zero) {
                    continue;
                }
                match (b1, b2) {
                    (BandValue::Known(a), BandValue::Known(b)) => {
                        acc = &acc + &(a * b);
                    }
                    _ => {
                        available = false;
                        break;
                    }
                }
            }
            out.set(l, n, if available { Some(acc) } else { None });
        }
    }
    out
}

fn add_scaled(
    a: &BandedDifferenceOperator,
    b: &BandedDifferenceOperator,
    factor: f64,
) -> BandedDifferenceOperator {
    let k = a.bandwidth().max(b.bandwidth());
    let nmax = a.nmax().min(b.nmax());
    let size = a.size();
    let leading = if a.bandwidth() == b.bandwidth() {
        &a.leading + &b.leading.scale_re(factor)
    } else if a.bandwidth() > b.bandwidth() {
        a.leading.clone()
    } else {
        b.leading.scale_re(factor)
    };
    let mut out = BandedDifferenceOperator::blank(size, k, nmax, a.t(), leading);
    for l in -(k as i64)..=(k as i64) {
        for n in 0..=nmax {
            if n as i64 + l < 0 {
                continue;
            }
            let va = a.band(l, n as i64);
            let vb = b.band(l, n as i64);
            let entry = match (va, vb) {
                (BandValue::Unavailable, _) | (_, BandValue::Unavailable) => None,
                (BandValue::Zero, BandValue::Zero) => Some(CMatrix::zeros(size, size)),
                (BandValue::Known(x), BandValue::Zero) => Some(x.clone()),
                (BandValue::Zero, BandValue::Known(y)) => Some(y.scale_re(factor)),
                (BandValue::Known(x), BandValue::Known(y)) => Some(x + &y.scale_re(factor)),
            };
            out.set(l, n, entry);
        }
    }
    out
}

/// `v(M)` for a bandwidth-1 operator `M` and a real polynomial `v` of degree
/// d >= 1: the bandwidth-d operator whose (l, n) coefficient sums the ordered
/// products along all length-j index paths from n to n+l, weighted by v_j.
/// Realized as banded operator powers, which produces exactly the path sums.
pub fn compose_vm(
    op: &BandedDifferenceOperator,
    v_coeffs: &[f64],
) -> Result<BandedDifferenceOperator> {
    if op.bandwidth() != 1 {
        return Err(Error::Bandwidth { expected: 1, got: op.bandwidth() });
    }
    let mut v = v_coeffs.to_vec();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    if v.len() < 2 {
        return Err(Error::Parameter(
            "compose_vm needs a polynomial of degree at least 1".into(),
        ));
    }
    let mut acc = BandedDifferenceOperator::identity(op.size(), op.nmax(), op.t()).scale_re(v[0]);
    let mut power = BandedDifferenceOperator::identity(op.size(), op.nmax(), op.t());
    for &coeff in &v[1..] {
        power = compose(op, &power);
        if coeff != 0.0 {
            acc = add_scaled(&acc, &power, coeff);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{casimir, closed_form_g2x2, hermite_weight, HermiteParams};
    use crate::mvop::build_family;
    use crate::quadrature::make_gauss_hermite;
    use crate::weight::{coeff_distance, coeff_scale, compose_v_of_lambda, MatrixPolynomial, WeightSpec};
    use std::sync::Arc;

    fn scalar_weight() -> WeightSpec {
        WeightSpec::new(
            1,
            (f64::NEG_INFINITY, f64::INFINITY),
            Arc::new(|_x| CMatrix::identity(1)),
            true,
            MatrixPolynomial::scalar(1, &[0.0, 1.0]).unwrap(),
            "scalar hermite",
        )
        .unwrap()
    }

    fn hermite2_family(t: f64, nmax: usize) -> crate::mvop::MvopFamily {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(nmax + 12).unwrap();
        build_family(&w, t, nmax, &rule).unwrap()
    }

    #[test]
    fn multiplication_by_x_recovers_recurrence() {
        // L = x: G_1 = I, G_0 = B(n), G_{-1} = C(n)
        let w = scalar_weight();
        let rule = make_gauss_hermite(24).unwrap();
        let fam = build_family(&w, 0.0, 8, &rule).unwrap();
        let op = compute_g(&fam, &MatrixPolynomial::scalar(1, &[0.0, 1.0]).unwrap(), &rule).unwrap();
        let (b, c) = fam.recurrence();
        for n in 0..=8usize {
            if let Some(g1) = op.stored(1, n) {
                assert!((g1[(0, 0)].re - 1.0).abs() < 1e-12, "G_1({n})");
            }
            let g0 = op.stored(0, n).unwrap();
            assert!((g0 - &b[n]).norm_max() < 1e-11, "G_0({n})");
            if n >= 1 {
                let gm1 = op.stored(-1, n).unwrap();
                assert!((gm1 - &c[n]).norm_max() < 1e-11, "G_-1({n})");
            }
        }
    }

    #[test]
    fn casimir_bands_match_closed_forms() {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let cas = casimir(&p);
        let rule = make_gauss_hermite(22).unwrap();
        for t in [-0.5, 0.0, 0.5] {
            let fam = hermite2_family(t, 10);
            let op = compute_g(&fam, &cas, &rule).unwrap();
            for n in 0..=9usize {
                let (g1, g0, gm1) = closed_form_g2x2(n, t, 1.0);
                assert!((op.stored(1, n).unwrap() - &g1).norm_max() < 1e-10, "G_1({n};{t})");
                assert!((op.stored(0, n).unwrap() - &g0).norm_max() < 1e-10, "G_0({n};{t})");
                if n >= 1 {
                    assert!(
                        (op.stored(-1, n).unwrap() - &gm1).norm_max() < 1e-10,
                        "G_-1({n};{t})"
                    );
                }
            }
        }
    }

    #[test]
    fn casimir_g0_gm1_printed_values_at_n1() {
        let fam = hermite2_family(0.0, 6);
        let rule = make_gauss_hermite(18).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        let g0 = op.stored(0, 1).unwrap();
        assert!((g0 - &CMatrix::diag(&[4.0 / 3.0, 1.5])).norm_max() < 1e-11);
        let gm1 = op.stored(-1, 1).unwrap();
        let expected = CMatrix::from_real_rows(&[&[0.0, -2.0 / 9.0], &[0.0, 0.0]]);
        assert!((gm1 - &expected).norm_max() < 1e-11);
    }

    #[test]
    fn pearson_rejects_asymmetric_symbol() {
        // the constant off-diagonal flip is not symmetric for this weight
        // (its commutator with W is even in x, so no parity cancellation
        // rescues it) and the Pearson check must refuse the operator
        let fam = hermite2_family(0.0, 6);
        let rule = make_gauss_hermite(18).unwrap();
        let flip = MatrixPolynomial::constant(CMatrix::from_real_rows(&[
            &[0.0, 1.0],
            &[1.0, 0.0],
        ]));
        match compute_g(&fam, &flip, &rule) {
            Err(Error::Consistency { .. }) => {}
            other => panic!("expected consistency error, got {other:?}"),
        }
    }

    #[test]
    fn apply_reproduces_right_multiplication() {
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let cas = casimir(&p);
        let rule = make_gauss_hermite(22).unwrap();
        let fam = hermite2_family(0.0, 8);
        let op = compute_g(&fam, &cas, &rule).unwrap();
        for n in 0..=7usize {
            let lhs = apply(&op, &fam, n).unwrap();
            let rhs = fam.poly(n).mul(&cas);
            let d = coeff_distance(&lhs, &rhs);
            assert!(d <= 1e-10 * coeff_scale(&rhs).max(1.0), "n={n}: {d:.2e}");
        }
    }

    #[test]
    fn apply_x_on_scalar_recovers_recurrence_shift() {
        // x P_3 = P_4 + (3/2) P_2 for monic Hermite
        let w = scalar_weight();
        let rule = make_gauss_hermite(24).unwrap();
        let fam = build_family(&w, 0.0, 6, &rule).unwrap();
        let op = compute_g(&fam, &MatrixPolynomial::scalar(1, &[0.0, 1.0]).unwrap(), &rule).unwrap();
        let lhs = apply(&op, &fam, 3).unwrap();
        let rhs = fam.poly(3).times_x();
        assert!(coeff_distance(&lhs, &rhs) < 1e-11);
        let direct = fam.poly(4).add(&fam.poly(2).lmul_matrix(&CMatrix::identity(1).scale_re(1.5)));
        assert!(coeff_distance(&lhs, &direct) < 1e-10);
    }

    #[test]
    fn apply_out_of_range() {
        let fam = hermite2_family(0.0, 4);
        let rule = make_gauss_hermite(16).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        assert!(apply(&op, &fam, 4).is_err());
    }

    #[test]
    fn compose_vm_identity_polynomial() {
        let fam = hermite2_family(0.0, 6);
        let rule = make_gauss_hermite(18).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        let same = compose_vm(&op, &[0.0, 1.0]).unwrap();
        for n in 0..=6usize {
            for j in -1..=1i64 {
                if let (Some(a), Some(b)) = (op.stored(j, n), same.stored(j, n)) {
                    assert!((a - b).norm_max() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn compose_vm_square_matches_path_scheme() {
        // hand-rolled path products for v = x^2
        let fam = hermite2_family(0.2, 8);
        let rule = make_gauss_hermite(22).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        let sq = compose_vm(&op, &[0.0, 0.0, 1.0]).unwrap();
        let g = |j: i64, n: i64| -> CMatrix {
            match op.band(j, n) {
                BandValue::Known(v) => v.clone(),
                BandValue::Zero => CMatrix::zeros(2, 2),
                BandValue::Unavailable => panic!("unavailable ({j},{n})"),
            }
        };
        for n in 2..=5i64 {
            // l = -2: K_{-1}(n) K_{-1}(n-1)
            let expected = &g(-1, n) * &g(-1, n - 1);
            assert!((sq.stored(-2, n as usize).unwrap() - &expected).norm_max() < 1e-13);
            // l = -1: K_0(n) K_{-1}(n) + K_{-1}(n) K_0(n-1)
            let expected = &(&g(0, n) * &g(-1, n)) + &(&g(-1, n) * &g(0, n - 1));
            assert!((sq.stored(-1, n as usize).unwrap() - &expected).norm_max() < 1e-13);
            // l = 0: K_1(n) K_{-1}(n+1) + K_0(n)^2 + K_{-1}(n) K_1(n-1)
            let expected = &(&(&g(1, n) * &g(-1, n + 1)) + &(&g(0, n) * &g(0, n)))
                + &(&g(-1, n) * &g(1, n - 1));
            assert!((sq.stored(0, n as usize).unwrap() - &expected).norm_max() < 1e-13);
        }
    }

    #[test]
    fn compose_vm_consistent_with_composed_symbol() {
        // v(M_L) must equal the operator extracted for v(L) directly
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let cas = casimir(&p);
        let rule = make_gauss_hermite(28).unwrap();
        let fam = hermite2_family(0.3, 10);
        let op = compute_g(&fam, &cas, &rule).unwrap();
        for v in [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.5, -1.0, 2.0, 0.0]] {
            let composed = compose_vm(&op, &v).unwrap();
            let symbol = compose_v_of_lambda(&cas, &v).unwrap();
            let direct = compute_g(&fam, &symbol, &rule).unwrap();
            let k = symbol.degree() as i64;
            for n in 0..=10usize {
                for j in -k..=k {
                    if let (Some(a), Some(b)) = (composed.stored(j, n), direct.stored(j, n)) {
                        let resid = (a - b).norm_max() / b.norm_max().max(1.0);
                        assert!(resid <= 1e-9, "v={v:?} j={j} n={n}: {resid:.2e}");
                    }
                }
            }
        }
    }

    #[test]
    fn compose_vm_contract_errors() {
        let fam = hermite2_family(0.0, 6);
        let rule = make_gauss_hermite(18).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        let wide = compose_vm(&op, &[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(compose_vm(&wide, &[0.0, 1.0]), Err(Error::Bandwidth { .. })));
        assert!(compose_vm(&op, &[1.0]).is_err());
    }

    #[test]
    fn leading_band_is_constant_minus_a() {
        let fam = hermite2_family(0.7, 8);
        let rule = make_gauss_hermite(22).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        assert!(op.leading_band_deviation() <= 1e-10);
        let minus_a = CMatrix::from_real_rows(&[&[0.0, 0.0], &[-1.0, 0.0]]);
        assert!((op.leading() - &minus_a).norm_max() < 1e-12);
        // extension beyond the truncation serves the constant
        match op.band(1, op.nmax() as i64 + 3) {
            BandValue::Known(v) => assert!((v - &minus_a).norm_max() < 1e-10),
            other => panic!("expected leading extension, got {other:?}"),
        }
    }

    #[test]
    fn weak_pearson_residual_is_tiny() {
        let fam = hermite2_family(0.5, 10);
        let rule = make_gauss_hermite(24).unwrap();
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        assert!(op.weak_pearson_residual(fam.norms()) <= 1e-9);
    }
}
