//! The build / verify / evolve subcommands.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use mvop_core::diffop::{compute_g, BandedDifferenceOperator};
use mvop_core::export::{
    to_json_string, trajectory_csv, FamilyExport, OperatorExport, ResidualCheck, ResidualReport,
};
use mvop_core::hermite::{closed_form_g2x2, closed_form_p2x2_poly};
use mvop_core::lax::verify_lax;
use mvop_core::linalg::CMatrix;
use mvop_core::mvop::{
    build_family, build_family_from_moments, deform_moments, MvopFamily,
};
use mvop_core::quadrature::{make_gauss_hermite, QuadratureRule};
use mvop_core::toda::{fd_validate, hdot_rhs, integrate, LatticeState};
use mvop_core::weight::{coeff_distance, coeff_scale};

use crate::config::{RunConfig, WeightSetup};

pub struct VerifyOptions {
    pub suite: String,
    /// Magnitude of a deliberate band corruption (negative-control fixture).
    pub corrupt_band: Option<f64>,
}

fn rule_for(config: &RunConfig) -> Result<QuadratureRule> {
    make_gauss_hermite(config.quad_points).map_err(|e| anyhow!("{e}"))
}

fn timestamp_header(config: &RunConfig) -> Option<String> {
    if config.no_header {
        None
    } else {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Some(format!("unix:{secs}"))
    }
}

/// Builds the family for the configured weight at the configured t.
fn build_configured(config: &RunConfig, t: f64, rule: &QuadratureRule) -> Result<MvopFamily> {
    match &config.setup {
        WeightSetup::Spec { weight, .. } => {
            build_family(weight, t, config.nmax, rule).map_err(|e| anyhow!("{e}"))
        }
        WeightSetup::Moments { moments, lambda } => {
            let needed = 2 * config.nmax + 2 + 2 * config.setup.bandwidth();
            let deformed = if t == 0.0 {
                moments[..needed.min(moments.len())].to_vec()
            } else if let Some(l) = lambda {
                deform_moments(moments, l, t, needed.min(moments.len()))
                    .map_err(|e| anyhow!("deforming custom moments: {e}"))?
            } else {
                bail!("custom_moments weight needs a 'deformation' to move in t")
            };
            build_family_from_moments(deformed, t, config.nmax).map_err(|e| anyhow!("{e}"))
        }
    }
}

fn operator_for(
    config: &RunConfig,
    fam: &MvopFamily,
    rule: &QuadratureRule,
) -> Result<BandedDifferenceOperator> {
    let lambda = match &config.setup {
        WeightSetup::Spec { lambda, .. } => lambda.clone(),
        WeightSetup::Moments { lambda, .. } => lambda
            .clone()
            .ok_or_else(|| anyhow!("custom_moments weight has no deformation symbol"))?,
    };
    compute_g(fam, &lambda, rule).map_err(|e| anyhow!("{e}"))
}

fn write_output(path: Option<&Path>, default_name: &str, content: &str) -> Result<()> {
    let path = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| std::path::PathBuf::from(default_name));
    std::fs::write(&path, content)
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn condition_number(m: &CMatrix) -> f64 {
    match m.inverse() {
        Ok(inv) => m.norm_max() * inv.norm_max(),
        Err(_) => f64::INFINITY,
    }
}

pub fn cmd_build(config: &RunConfig) -> Result<()> {
    let rule = rule_for(config)?;
    let fam = build_configured(config, config.t, &rule)?;
    let report = match &config.setup {
        WeightSetup::Spec { .. } => fam.validate(Some(&rule)).map_err(|e| anyhow!("{e}"))?,
        WeightSetup::Moments { .. } => fam.validate(None).map_err(|e| anyhow!("{e}"))?,
    };

    println!("family: {} at t = {}", config.label, config.t);
    println!("  nmax = {}, quadrature points = {}", config.nmax, config.quad_points);
    println!("  orthogonality residual: {:.3e}", report.orthogonality);
    println!("  recurrence residual:    {:.3e}", report.recurrence);
    println!("  norms Hermitian PD:     {}", report.norms_positive_definite);
    print!("  cond(H_n):             ");
    for n in 0..=config.nmax {
        print!(" {:.2e}", condition_number(fam.norm(n)));
    }
    println!();

    let mut export = FamilyExport::from_family(&fam, &config.label);
    export.generated_at = timestamp_header(config);
    write_output(config.out.as_deref(), "mvop_family.json", &to_json_string(&export))
}

fn pearson_suite(
    config: &RunConfig,
    fam: &MvopFamily,
    rule: &QuadratureRule,
    corrupt: Option<f64>,
) -> Result<Vec<ResidualCheck>> {
    let mut op = operator_for(config, fam, rule)?;
    if let Some(eps) = corrupt {
        let n = 1.min(fam.nmax());
        let band = if op.bandwidth() >= 1 { -1 } else { 0 };
        let delta = CMatrix::identity(fam.size()).scale_re(eps);
        op = op.perturbed(band, n, &delta);
    }
    Ok(vec![
        ResidualCheck::new(
            "weak_pearson",
            op.weak_pearson_residual(fam.norms()),
            config.tol.pearson,
        ),
        ResidualCheck::new("leading_band_constancy", op.leading_band_deviation(), 1e-10),
    ])
}

fn orthogonality_suite(
    config: &RunConfig,
    fam: &MvopFamily,
    rule: &QuadratureRule,
) -> Result<Vec<ResidualCheck>> {
    let report = match &config.setup {
        WeightSetup::Spec { .. } => fam.validate(Some(rule)).map_err(|e| anyhow!("{e}"))?,
        WeightSetup::Moments { .. } => fam.validate(None).map_err(|e| anyhow!("{e}"))?,
    };
    Ok(vec![
        ResidualCheck::new("orthogonality", report.orthogonality, config.tol.orthogonality),
        ResidualCheck::new("recurrence", report.recurrence, config.tol.orthogonality),
        ResidualCheck::new("norm_hermiticity", report.norm_hermiticity, 1e-10),
        ResidualCheck::new(
            "norms_positive_definite",
            if report.norms_positive_definite { 0.0 } else { 1.0 },
            0.5,
        ),
    ])
}

fn toda_suite(
    config: &RunConfig,
    fam: &MvopFamily,
    rule: &QuadratureRule,
) -> Result<Vec<ResidualCheck>> {
    let WeightSetup::Spec { weight, lambda, .. } = &config.setup else {
        bail!("the toda suite rebuilds the weight at t +- h and needs an evaluable weight");
    };
    let fd = fd_validate(weight, lambda, config.t, config.fd_h, config.nmax, rule)
        .map_err(|e| anyhow!("{e}"))?;

    let op = operator_for(config, fam, rule)?;
    let state = LatticeState::from_family(fam, op).map_err(|e| anyhow!("{e}"))?;
    let hdot = hdot_rhs(&state).map_err(|e| anyhow!("{e}"))?;
    let h = config.fd_h;
    let fam_m = build_configured(config, config.t - h, rule)?;
    let fam_p = build_configured(config, config.t + h, rule)?;
    let mut hdot_resid = 0.0f64;
    for (n, dot) in hdot.iter().enumerate().take(config.nmax + 1) {
        if let Some(dot) = dot {
            let fd_h = (fam_p.norm(n) - fam_m.norm(n)).scale_re(0.5 / h);
            hdot_resid =
                hdot_resid.max((&fd_h - dot).norm_max() / fam.norm(n).norm_max().max(1.0));
        }
    }
    Ok(vec![
        ResidualCheck::new("flow_fd", fd.max_residual, config.tol.flow_fd),
        ResidualCheck::new("norm_derivative_fd", hdot_resid, config.tol.norm_fd),
    ])
}

fn lax_suite(config: &RunConfig, rule: &QuadratureRule) -> Result<Vec<ResidualCheck>> {
    let WeightSetup::Spec { weight, lambda, .. } = &config.setup else {
        bail!("the lax suite rebuilds the weight at t +- h and needs an evaluable weight");
    };
    let nblocks = (config.nmax + 1).saturating_sub(lambda.degree()).max(2);
    let report = verify_lax(weight, lambda, config.t, config.fd_h, nblocks, rule)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(vec![ResidualCheck::new("lax_fd", report.max_residual, config.tol.lax_fd)])
}

fn hermite_oracle_suite(
    config: &RunConfig,
    fam: &MvopFamily,
    rule: &QuadratureRule,
) -> Result<Option<Vec<ResidualCheck>>> {
    let WeightSetup::Spec { lambda, hermite: Some(p), .. } = &config.setup else {
        return Ok(None);
    };
    if p.size() != 2 || coeff_distance(lambda, &mvop_core::hermite::casimir(p)) != 0.0 {
        return Ok(None);
    }
    let a = p.a()[0];
    let op = operator_for(config, fam, rule)?;
    let mut poly_resid = 0.0f64;
    let mut band_resid = 0.0f64;
    for n in 0..=config.nmax {
        let cf = closed_form_p2x2_poly(n, config.t, a);
        poly_resid =
            poly_resid.max(coeff_distance(fam.poly(n), &cf) / coeff_scale(&cf).max(1.0));
        let (g1, g0, gm1) = closed_form_g2x2(n, config.t, a);
        if let Some(v) = op.stored(1, n) {
            band_resid = band_resid.max((v - &g1).norm_max() / g1.norm_max().max(1.0));
        }
        if let Some(v) = op.stored(0, n) {
            band_resid = band_resid.max((v - &g0).norm_max() / g0.norm_max().max(1.0));
        }
        if n >= 1 {
            if let Some(v) = op.stored(-1, n) {
                band_resid = band_resid.max((v - &gm1).norm_max() / gm1.norm_max().max(1.0));
            }
        }
    }
    Ok(Some(vec![
        ResidualCheck::new("closed_form_polynomials", poly_resid, config.tol.oracle),
        ResidualCheck::new("closed_form_bands", band_resid, config.tol.oracle),
    ]))
}

/// Runs the chosen suites; exit status is reported by the caller from the
/// returned pass flag.
pub fn cmd_verify(config: &RunConfig, opts: &VerifyOptions) -> Result<bool> {
    let rule = rule_for(config)?;
    let fam = build_configured(config, config.t, &rule)?;
    let mut checks = Vec::new();
    let suites: Vec<&str> = match opts.suite.as_str() {
        "all" => vec!["orthogonality", "pearson", "toda", "lax", "hermite-oracle"],
        s => vec![s],
    };
    for suite in &suites {
        match *suite {
            "orthogonality" => checks.extend(orthogonality_suite(config, &fam, &rule)?),
            "pearson" => checks.extend(pearson_suite(config, &fam, &rule, opts.corrupt_band)?),
            "toda" => match &config.setup {
                WeightSetup::Spec { .. } => checks.extend(toda_suite(config, &fam, &rule)?),
                WeightSetup::Moments { .. } if opts.suite == "all" => {}
                WeightSetup::Moments { .. } => checks.extend(toda_suite(config, &fam, &rule)?),
            },
            "lax" => match &config.setup {
                WeightSetup::Spec { .. } => checks.extend(lax_suite(config, &rule)?),
                WeightSetup::Moments { .. } if opts.suite == "all" => {}
                WeightSetup::Moments { .. } => checks.extend(lax_suite(config, &rule)?),
            },
            "hermite-oracle" => match hermite_oracle_suite(config, &fam, &rule)? {
                Some(c) => checks.extend(c),
                None if opts.suite == "all" => {}
                None => bail!("the hermite-oracle suite needs the 2x2 casimir preset"),
            },
            other => bail!(
                "unknown suite {other:?} (orthogonality|pearson|toda|lax|hermite-oracle|all)"
            ),
        }
    }

    let mut report = ResidualReport::new(opts.suite.clone(), checks);
    report.generated_at = timestamp_header(config);
    let json = to_json_string(&report);
    for check in &report.checks {
        println!(
            "{} {:<28} residual {:.3e}  threshold {:.1e}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.residual,
            check.threshold
        );
    }
    if let Some(out) = &config.out {
        write_output(Some(out), "report.json", &json)?;
    }
    Ok(report.pass)
}

pub fn cmd_evolve(config: &RunConfig) -> Result<()> {
    if config.steps == 0 {
        bail!("field 'steps': evolve needs at least one step");
    }
    let rule = rule_for(config)?;
    let fam0 = build_configured(config, config.t0, &rule)?;
    let op0 = operator_for(config, &fam0, &rule)?;
    let state0 = LatticeState::from_family(&fam0, op0).map_err(|e| anyhow!("{e}"))?;
    let trajectory = integrate(&state0, config.t1, config.steps).map_err(|e| anyhow!("{e}"))?;

    // endpoint comparison against a from-scratch re-orthogonalization;
    // the top k rows touch the extrapolated pad and are reported separately
    let fam1 = build_configured(config, config.t1, &rule)?;
    let op1 = operator_for(config, &fam1, &rule)?;
    let last = trajectory.last().expect("trajectory is non-empty");
    let k = last.op().bandwidth();
    let interior_top = config.nmax.saturating_sub(k);
    let mut endpoint = 0.0f64;
    let mut boundary = 0.0f64;
    for n in 0..=config.nmax {
        for j in -(k as i64)..=(k as i64) {
            if let (Some(a), Some(b)) = (last.op().stored(j, n), op1.stored(j, n)) {
                let resid = (a - b).norm_max() / b.norm_max().max(1.0);
                if n <= interior_top {
                    endpoint = endpoint.max(resid);
                } else {
                    boundary = boundary.max(resid);
                }
            }
        }
    }
    println!(
        "evolved {} from t = {} to t = {} in {} steps",
        config.label, config.t0, config.t1, config.steps
    );
    println!(
        "endpoint residual vs re-orthogonalization: {:.3e} on rows 0..={} (threshold {:.1e}), {:.3e} on the {} pad-contact rows",
        endpoint, interior_top, config.tol.evolve_endpoint, boundary, config.nmax - interior_top
    );

    let header = timestamp_header(config);
    let csv = trajectory_csv(&trajectory, header.as_deref());
    write_output(config.out.as_deref(), "trajectory.csv", &csv)?;

    if endpoint > config.tol.evolve_endpoint {
        bail!("endpoint residual {endpoint:.3e} exceeds {:.1e}", config.tol.evolve_endpoint);
    }
    Ok(())
}

/// Exports the operator alongside a build (used by `build --operator-out`).
pub fn export_operator(
    config: &RunConfig,
    path: &Path,
) -> Result<()> {
    let rule = rule_for(config)?;
    let fam = build_configured(config, config.t, &rule)?;
    let op = operator_for(config, &fam, &rule)?;
    let mut export = OperatorExport::from_operator(&op);
    export.generated_at = timestamp_header(config);
    write_output(Some(path), "operator.json", &to_json_string(&export))
}
