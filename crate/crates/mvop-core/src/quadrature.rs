//! Quadrature rules for the matrix-valued inner product.
//!
//! Gauss-Hermite is the workhorse: weights of Hermite type decay like
//! e^{-x^2}, and with that factor absorbed into the rule every remaining
//! integrand the library produces is (or rapidly saturates like) a
//! polynomial, so the rules integrate exactly. Finite supports get a
//! composite Gauss-Legendre rule instead.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::linalg::CMatrix;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

const NEWTON_EPS: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    GaussHermite,
    CompositeGaussLegendre,
}

/// Immutable quadrature rule: strictly increasing nodes, positive weights.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scheme: Scheme,
    exact_degree: usize,
    /// For composite rules: (points per panel, panel count, support).
    panels: Option<(usize, usize, f64, f64)>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Highest polynomial degree the rule integrates exactly (per panel for
    /// composite rules).
    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A rule of the same scheme with twice the nodes, used by saturation
    /// checks.
    pub fn doubled(&self) -> Result<QuadratureRule> {
        match self.scheme {
            Scheme::GaussHermite => make_gauss_hermite(2 * self.nodes.len()),
            Scheme::CompositeGaussLegendre => {
                let (pts, panels, a, b) = self.panels.expect("composite rule carries panel info");
                make_composite_gauss_legendre(2 * pts, panels, a, b)
            }
        }
    }
}

/// Rescale threshold for the orthonormal Hermite recurrence; values beyond
/// the classical turning point grow like e^{z^2/2} and would overflow for
/// large degree otherwise. Newton steps and sign scans only use ratios, so
/// common rescaling is free.
const HERMITE_RESCALE: f64 = 1e150;

/// Orthonormal Hermite value and derivative at z, both scaled by
/// `HERMITE_RESCALE^{-rescales}`.
fn hermite_value_scaled(n: usize, z: f64) -> (f64, f64, i32) {
    let pim4 = 1.0 / std::f64::consts::PI.powf(0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0f64;
    let mut rescales = 0i32;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > HERMITE_RESCALE {
            p1 /= HERMITE_RESCALE;
            p2 /= HERMITE_RESCALE;
            rescales += 1;
        }
    }
    (p1, (2.0 * n as f64).sqrt() * p2, rescales)
}

/// `2 / pp^2` from the scaled derivative; far-tail weights below the normal
/// floating range are clamped to the smallest positive normal value to keep
/// every weight positive.
fn weight_from_derivative(pp_scaled: f64, rescales: i32) -> f64 {
    if rescales == 0 {
        let w = 2.0 / pp_scaled / pp_scaled;
        if w.is_finite() && w > 0.0 {
            return w;
        }
    }
    let log_w = 2.0f64.ln()
        - 2.0 * (pp_scaled.abs().ln() + rescales as f64 * HERMITE_RESCALE.ln());
    let w = log_w.exp();
    if w > 0.0 {
        w
    } else {
        f64::MIN_POSITIVE
    }
}

/// Gauss-Hermite rule with `npoints` nodes for integrals of the form
/// `integral f(x) e^{-x^2} dx` (the Gaussian factor lives in the weights).
///
/// Nodes are the roots of the degree-`npoints` Hermite polynomial: a sign
/// scan on the positive axis brackets each root, then bisection-safeguarded
/// Newton converges it to 1e-14. Plain Newton from asymptotic guesses
/// overshoots between edge roots past degree ~150, hence the brackets.
/// Exact for polynomials of degree up to `2*npoints - 1`.
pub fn make_gauss_hermite(npoints: usize) -> Result<QuadratureRule> {
    if npoints == 0 || npoints > 500 {
        return Err(Error::Parameter(format!(
            "gauss-hermite points must be in 1..=500, got {npoints}"
        )));
    }
    let n = npoints;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    let positive_roots = n / 2;
    if positive_roots > 0 {
        let upper = (2.0 * nf + 1.0).sqrt() + 0.5;
        let mut brackets = Vec::new();
        let mut scan_points = 8 * n + 16;
        for _ in 0..4 {
            brackets.clear();
            // for odd n the origin itself is a root; start half a cell in
            let lo = if n % 2 == 1 { upper / scan_points as f64 * 0.5 } else { 0.0 };
            let step = (upper - lo) / scan_points as f64;
            let mut prev_z = lo;
            let mut prev_sign = hermite_value_scaled(n, lo).0.signum();
            for i in 1..=scan_points {
                let z = lo + step * i as f64;
                let sign = hermite_value_scaled(n, z).0.signum();
                if sign != prev_sign {
                    brackets.push((prev_z, z));
                }
                prev_z = z;
                prev_sign = sign;
            }
            if brackets.len() == positive_roots {
                break;
            }
            scan_points *= 4;
        }
        if brackets.len() != positive_roots {
            return Err(Error::Accuracy {
                what: "gauss-hermite root bracketing",
                change: brackets.len() as f64,
                tol: positive_roots as f64,
            });
        }

        for (idx, &(bracket_lo, bracket_hi)) in brackets.iter().enumerate() {
            let (mut a, mut b) = (bracket_lo, bracket_hi);
            let fa_sign = hermite_value_scaled(n, a).0.signum();
            let mut z = 0.5 * (a + b);
            let mut converged = None;
            for _ in 0..NEWTON_MAX_ITER {
                let (p1, dp, _) = hermite_value_scaled(n, z);
                if p1.signum() == fa_sign {
                    a = z;
                } else {
                    b = z;
                }
                let mut z_next = z - p1 / dp;
                if !(z_next > a && z_next < b) {
                    z_next = 0.5 * (a + b); // Newton left the bracket; bisect
                }
                if (z_next - z).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                    // final polish, then the derivative at the settled root
                    let (p1, dp, _) = hermite_value_scaled(n, z_next);
                    let root = z_next - p1 / dp;
                    let (_, pp, rs) = hermite_value_scaled(n, root);
                    converged = Some((root, pp, rs));
                    break;
                }
                z = z_next;
            }
            let Some((root, pp, rescales)) = converged else {
                return Err(Error::Accuracy {
                    what: "gauss-hermite Newton iteration",
                    change: (b - a).abs(),
                    tol: NEWTON_EPS,
                });
            };
            let w = weight_from_derivative(pp, rescales);
            // brackets ascend on the positive axis; mirror onto the negatives
            let hi = n.div_ceil(2) + idx;
            let lo_idx = n / 2 - 1 - idx;
            nodes[hi] = root;
            nodes[lo_idx] = -root;
            weights[hi] = w;
            weights[lo_idx] = w;
        }
    }
    if n % 2 == 1 {
        let (_, pp, rescales) = hermite_value_scaled(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = weight_from_derivative(pp, rescales);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        scheme: Scheme::GaussHermite,
        exact_degree: 2 * npoints - 1,
        panels: None,
    })
}

/// Composite Gauss-Legendre rule on a finite interval `[a, b]` with
/// `npanels` equal panels of `points_per_panel` nodes each.
pub fn make_composite_gauss_legendre(
    points_per_panel: usize,
    npanels: usize,
    a: f64,
    b: f64,
) -> Result<QuadratureRule> {
    if points_per_panel == 0 || points_per_panel > 500 || npanels == 0 {
        return Err(Error::Parameter(format!(
            "composite gauss-legendre needs positive sizes, got {points_per_panel} points, {npanels} panels"
        )));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Parameter(format!(
            "composite gauss-legendre needs a finite interval, got [{a}, {b}]"
        )));
    }
    let (ref_nodes, ref_weights) = gauss_legendre_reference(points_per_panel)?;
    let width = (b - a) / npanels as f64;
    let mut nodes = Vec::with_capacity(points_per_panel * npanels);
    let mut weights = Vec::with_capacity(points_per_panel * npanels);
    for p in 0..npanels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (&x, &w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        scheme: Scheme::CompositeGaussLegendre,
        exact_degree: 2 * points_per_panel - 1,
        panels: Some((points_per_panel, npanels, a, b)),
    })
}

fn gauss_legendre_reference(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Accuracy {
                what: "gauss-legendre Newton iteration",
                change: NEWTON_EPS,
                tol: NEWTON_EPS,
            });
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Sum of `weight_i * f(node_i)` over the rule.
///
/// `gaussian_factor_included` records the integrand convention and must match
/// the rule: `true` for Gauss-Hermite (the e^{-x^2} factor is absorbed by the
/// weights, so `f` is the reduced integrand), `false` for composite
/// Gauss-Legendre (`f` is the full integrand).
///
/// Nodes are evaluated independently (in parallel when enabled) and summed in
/// node order, so the result is identical across thread counts.
pub fn integrate_matrix<F>(
    f: F,
    rule: &QuadratureRule,
    gaussian_factor_included: bool,
) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix> + Sync + Send,
{
    let want_flag = rule.scheme == Scheme::GaussHermite;
    if gaussian_factor_included != want_flag {
        return Err(Error::Parameter(format!(
            "gaussian_factor_included={gaussian_factor_included} does not match scheme {:?}",
            rule.scheme
        )));
    }
    let values = map_indexed(rule.nodes.len(), |i| f(rule.nodes[i]));
    let mut acc: Option<CMatrix> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        match &mut acc {
            None => acc = Some(v.scale_re(rule.weights[i])),
            Some(a) => {
                if v.rows() != a.rows() || v.cols() != a.cols() {
                    return Err(Error::Dimension {
                        context: "integrate_matrix: integrand changed shape",
                        expected: (a.rows(), a.cols()),
                        got: (v.rows(), v.cols()),
                    });
                }
                *a = &*a + &v.scale_re(rule.weights[i]);
            }
        }
    }
    acc.ok_or_else(|| Error::Parameter("empty quadrature rule".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn gaussian_moment(m: usize) -> f64 {
        // integral x^m e^{-x^2} dx
        if m % 2 == 1 {
            return 0.0;
        }
        let mut v = SQRT_PI;
        let mut j = 2;
        while j <= m {
            v *= (j - 1) as f64 / 2.0;
            j += 2;
        }
        v
    }

    #[test]
    fn one_point_rule() {
        let r = make_gauss_hermite(1).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert!((r.weights()[0] - SQRT_PI).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule_analytic() {
        // roots of H_2(x) = 4x^2 - 2 are +-1/sqrt(2), both weights sqrt(pi)/2
        let r = make_gauss_hermite(2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((r.nodes()[0] + s).abs() < 1e-14);
        assert!((r.nodes()[1] - s).abs() < 1e-14);
        assert!((r.weights()[0] - SQRT_PI / 2.0).abs() < 1e-14);
        assert!((r.weights()[1] - SQRT_PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn npoints_out_of_range() {
        assert!(make_gauss_hermite(0).is_err());
        assert!(make_gauss_hermite(501).is_err());
    }

    #[test]
    fn nodes_increasing_weights_positive() {
        for n in [1, 2, 3, 7, 20, 64, 150, 500] {
            let r = make_gauss_hermite(n).unwrap();
            assert!(r.weights().iter().all(|&w| w > 0.0), "n={n}");
            assert!(r.nodes().windows(2).all(|p| p[0] < p[1]), "n={n}");
        }
    }

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 13, 40, 200, 500] {
            let r = make_gauss_hermite(n).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - SQRT_PI).abs() <= 1e-13 * SQRT_PI, "n={n}: {s}");
        }
    }

    #[test]
    fn moment_exactness_up_to_2n_minus_1() {
        for n in [1usize, 2, 3, 5, 8, 16] {
            let r = make_gauss_hermite(n).unwrap();
            for m in 0..=(2 * n - 1) {
                let q: f64 = r
                    .nodes()
                    .iter()
                    .zip(r.weights())
                    .map(|(&x, &w)| w * x.powi(m as i32))
                    .sum();
                let exact = gaussian_moment(m);
                // odd moments cancel to zero; measure against |x|^m scale
                let scale = gaussian_moment(m + m % 2).max(1.0);
                assert!(
                    (q - exact).abs() <= 1e-13 * scale,
                    "n={n} m={m}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn x_squared_moment_five_points() {
        let r = make_gauss_hermite(5).unwrap();
        let q = integrate_matrix(
            |x| Ok(CMatrix::identity(1).scale_re(x * x)),
            &r,
            true,
        )
        .unwrap();
        assert!((q[(0, 0)].re - SQRT_PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_integrand_matrix() {
        let r = make_gauss_hermite(3).unwrap();
        let q = integrate_matrix(|_| Ok(CMatrix::identity(2)), &r, true).unwrap();
        assert!((q[(0, 0)].re - SQRT_PI).abs() < 1e-14);
        assert!((q[(1, 1)].re - SQRT_PI).abs() < 1e-14);
        assert!(q[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let r = make_gauss_hermite(6).unwrap();
        let q = integrate_matrix(|x| Ok(CMatrix::identity(2).scale_re(x)), &r, true).unwrap();
        assert!(q.norm_max() < 1e-14);
    }

    #[test]
    fn flag_mismatch_rejected() {
        let r = make_gauss_hermite(3).unwrap();
        assert!(integrate_matrix(|_| Ok(CMatrix::identity(1)), &r, false).is_err());
    }

    #[test]
    fn composite_legendre_polynomial_exactness() {
        let r = make_composite_gauss_legendre(4, 3, 0.0, 2.0).unwrap();
        // integral of x^5 over [0, 2] = 64/6
        let q = integrate_matrix(|x| Ok(CMatrix::identity(1).scale_re(x.powi(5))), &r, false)
            .unwrap();
        assert!((q[(0, 0)].re - 64.0 / 6.0).abs() < 1e-12);
        let s: f64 = r.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 2usize..20) {
            let r = make_gauss_hermite(n).unwrap();
            let f = |x: f64| Ok(CMatrix::from_real_rows(&[&[1.0, x], &[x, x * x]]));
            let g = |x: f64| Ok(CMatrix::from_real_rows(&[&[x, 0.5], &[0.0, 1.0]]));
            let combined = |x: f64| -> crate::error::Result<CMatrix> {
                Ok(&f(x)?.scale_re(a) + &g(x)?.scale_re(b))
            };
            let lhs = integrate_matrix(combined, &r, true).unwrap();
            let rhs = &integrate_matrix(f, &r, true).unwrap().scale_re(a)
                + &integrate_matrix(g, &r, true).unwrap().scale_re(b);
            let scale = lhs.norm_max().max(rhs.norm_max()).max(1.0);
            prop_assert!((&lhs - &rhs).norm_max() <= 1e-13 * scale);
        }
    }

    #[test]
    fn hermitian_complex_integrand() {
        let r = make_gauss_hermite(8).unwrap();
        let f = |x: f64| {
            Ok(CMatrix::from_rows(vec![
                vec![Complex64::new(1.0, 0.0), Complex64::new(x, 0.3)],
                vec![Complex64::new(x, -0.3), Complex64::new(x * x, 0.0)],
            ]))
        };
        let q = integrate_matrix(f, &r, true).unwrap();
        assert!(q.is_hermitian(1e-13));
    }
}
