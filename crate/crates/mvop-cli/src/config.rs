//! Run configuration: JSON config files, presets, and flag overrides
//! (flags win over file values).

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use mvop_core::hermite::{casimir, hermite_weight, HermiteParams};
use mvop_core::linalg::CMatrix;
use mvop_core::weight::{MatrixPolynomial, WeightSpec};

/// Matrix entry: plain real or [re, im].
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EntryConfig {
    Real(f64),
    Complex([f64; 2]),
}

impl EntryConfig {
    fn to_complex(&self) -> mvop_core::Complex64 {
        match self {
            EntryConfig::Real(x) => mvop_core::Complex64::new(*x, 0.0),
            EntryConfig::Complex([re, im]) => mvop_core::Complex64::new(*re, *im),
        }
    }
}

pub type MatrixConfig = Vec<Vec<EntryConfig>>;

fn matrix_from_config(m: &MatrixConfig, what: &str) -> Result<CMatrix> {
    if m.is_empty() || m[0].is_empty() {
        bail!("field '{what}': matrix must be non-empty");
    }
    let cols = m[0].len();
    if m.iter().any(|row| row.len() != cols) {
        bail!("field '{what}': matrix rows must have equal length");
    }
    Ok(CMatrix::from_rows(
        m.iter().map(|row| row.iter().map(EntryConfig::to_complex).collect()).collect(),
    ))
}

/// Deformation symbol: a named one or explicit coefficient matrices
/// (index = power of x).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DeformationConfig {
    Named(String),
    Explicit { coeffs: Vec<MatrixConfig> },
}

impl DeformationConfig {
    pub fn resolve(&self, size: usize, params: Option<&HermiteParams>) -> Result<MatrixPolynomial> {
        match self {
            DeformationConfig::Named(name) => match name.as_str() {
                "casimir" => {
                    let p = params.ok_or_else(|| {
                        anyhow!("field 'deformation': \"casimir\" needs a hermite_A weight")
                    })?;
                    Ok(casimir(p))
                }
                "x" => Ok(MatrixPolynomial::scalar(size, &[0.0, 1.0])
                    .expect("x symbol is well-formed")),
                "x^2" | "x2" => Ok(MatrixPolynomial::scalar(size, &[0.0, 0.0, 1.0])
                    .expect("x^2 symbol is well-formed")),
                other => bail!(
                    "field 'deformation': unknown name {other:?} (expected \"casimir\", \"x\", \"x^2\" or explicit coefficients)"
                ),
            },
            DeformationConfig::Explicit { coeffs } => {
                let mats = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix_from_config(m, &format!("deformation.coeffs[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                let poly = MatrixPolynomial::new(mats)
                    .map_err(|e| anyhow!("field 'deformation': {e}"))?;
                if poly.size() != size {
                    bail!(
                        "field 'deformation': coefficient size {} does not match weight size {size}",
                        poly.size()
                    );
                }
                Ok(poly)
            }
        }
    }
}

/// Weight definition as loaded from a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    /// Hermite-type weight `e^{-x^2} e^{xA} e^{xA*}`.
    HermiteA {
        #[serde(alias = "N")]
        n: usize,
        a_params: Vec<f64>,
        #[serde(default)]
        deformation: Option<DeformationConfig>,
    },
    /// Weight given by a table of moment matrices of the base measure.
    CustomMoments {
        moments: Vec<MatrixConfig>,
        #[serde(default)]
        deformation: Option<DeformationConfig>,
    },
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub weight: Option<WeightConfig>,
    pub a_params: Option<Vec<f64>>,
    pub nmax: Option<usize>,
    pub quad_points: Option<usize>,
    pub t: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub steps: Option<usize>,
    pub fd_h: Option<f64>,
    pub out: Option<String>,
    pub tolerances: Option<ToleranceOverrides>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub orthogonality: Option<f64>,
    pub pearson: Option<f64>,
    pub flow_fd: Option<f64>,
    pub norm_fd: Option<f64>,
    pub lax_fd: Option<f64>,
    pub oracle: Option<f64>,
    pub evolve_endpoint: Option<f64>,
}

/// Effective thresholds after overrides.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub orthogonality: f64,
    pub pearson: f64,
    pub flow_fd: f64,
    pub norm_fd: f64,
    pub lax_fd: f64,
    pub oracle: f64,
    pub evolve_endpoint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            orthogonality: 1e-9,
            pearson: 1e-9,
            flow_fd: 5e-6,
            norm_fd: 5e-7,
            lax_fd: 5e-6,
            oracle: 1e-8,
            evolve_endpoint: 1e-7,
        }
    }
}

impl Tolerances {
    fn apply(&mut self, o: &ToleranceOverrides) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = o.$field {
                    self.$field = v;
                }
            };
        }
        set!(orthogonality);
        set!(pearson);
        set!(flow_fd);
        set!(norm_fd);
        set!(lax_fd);
        set!(oracle);
        set!(evolve_endpoint);
    }
}

/// A fully resolved weight: evaluator-backed or moment-backed.
pub enum WeightSetup {
    Spec {
        weight: WeightSpec,
        lambda: MatrixPolynomial,
        hermite: Option<HermiteParams>,
    },
    Moments {
        moments: Vec<CMatrix>,
        lambda: Option<MatrixPolynomial>,
    },
}

impl WeightSetup {
    pub fn bandwidth(&self) -> usize {
        match self {
            WeightSetup::Spec { lambda, .. } => lambda.degree(),
            WeightSetup::Moments { lambda, .. } => {
                lambda.as_ref().map_or(0, |l| l.degree())
            }
        }
    }
}

/// Everything one run needs.
pub struct RunConfig {
    pub setup: WeightSetup,
    pub label: String,
    pub nmax: usize,
    pub quad_points: usize,
    pub t: f64,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub fd_h: f64,
    pub out: Option<PathBuf>,
    pub no_header: bool,
    pub tol: Tolerances,
}

/// Flag-level overrides collected by the CLI.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub preset: Option<String>,
    pub a_params: Option<Vec<f64>>,
    pub nmax: Option<usize>,
    pub quad_points: Option<usize>,
    pub t: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub steps: Option<usize>,
    pub fd_h: Option<f64>,
    pub out: Option<PathBuf>,
    pub no_header: bool,
}

fn scalar_gaussian_weight(lambda: MatrixPolynomial) -> WeightSpec {
    WeightSpec::new(
        1,
        (f64::NEG_INFINITY, f64::INFINITY),
        Arc::new(|_x| CMatrix::identity(1)),
        true,
        lambda,
        "hermite N=1",
    )
    .expect("scalar weight is well-formed")
}

fn preset_setup(name: &str, a_params: Option<&[f64]>) -> Result<(WeightSetup, String)> {
    let lambda_x = |size| MatrixPolynomial::scalar(size, &[0.0, 1.0]).expect("x symbol");
    let lambda_x2 = |size| MatrixPolynomial::scalar(size, &[0.0, 0.0, 1.0]).expect("x^2 symbol");
    match name {
        "hermite2" => {
            let a = a_params.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0]);
            let p = HermiteParams::new(2, a).map_err(|e| anyhow!("preset hermite2: {e}"))?;
            let w = hermite_weight(&p);
            let lambda = casimir(&p);
            Ok((
                WeightSetup::Spec { weight: w, lambda, hermite: Some(p) },
                "hermite2 (casimir deformation)".into(),
            ))
        }
        "hermiteN" => {
            let a = a_params
                .ok_or_else(|| anyhow!("preset hermiteN needs --a with N-1 parameters"))?
                .to_vec();
            let p = HermiteParams::new(a.len() + 1, a)
                .map_err(|e| anyhow!("preset hermiteN: {e}"))?;
            let w = hermite_weight(&p);
            let lambda = casimir(&p);
            let label = format!("hermiteN N={} (casimir deformation)", p.size());
            Ok((WeightSetup::Spec { weight: w, lambda, hermite: Some(p) }, label))
        }
        "hermite2-x" => {
            let a = a_params.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0]);
            let p = HermiteParams::new(2, a).map_err(|e| anyhow!("preset hermite2-x: {e}"))?;
            let w = hermite_weight(&p).with_deformation(lambda_x(2))?;
            Ok((
                WeightSetup::Spec { weight: w, lambda: lambda_x(2), hermite: Some(p) },
                "hermite2 (x deformation)".into(),
            ))
        }
        "hermite1" => Ok((
            WeightSetup::Spec {
                weight: scalar_gaussian_weight(lambda_x(1)),
                lambda: lambda_x(1),
                hermite: Some(HermiteParams::new(1, vec![]).expect("N=1")),
            },
            "hermite1 (x deformation)".into(),
        )),
        "hermite1-x2" => Ok((
            WeightSetup::Spec {
                weight: scalar_gaussian_weight(lambda_x2(1)),
                lambda: lambda_x2(1),
                hermite: Some(HermiteParams::new(1, vec![]).expect("N=1")),
            },
            "hermite1 (x^2 deformation)".into(),
        )),
        other => bail!(
            "unknown preset {other:?} (available: hermite2, hermiteN, hermite2-x, hermite1, hermite1-x2)"
        ),
    }
}

fn weight_setup_from_config(
    cfg: &WeightConfig,
    a_flags: Option<&[f64]>,
) -> Result<(WeightSetup, String)> {
    match cfg {
        WeightConfig::HermiteA { n, a_params, deformation } => {
            let a = a_flags.map(<[f64]>::to_vec).unwrap_or_else(|| a_params.clone());
            let p = HermiteParams::new(*n, a).map_err(|e| anyhow!("field 'a_params': {e}"))?;
            let w = hermite_weight(&p);
            let lambda = match deformation {
                Some(d) => d.resolve(*n, Some(&p))?,
                None => casimir(&p),
            };
            let w = w.with_deformation(lambda.clone())?;
            let label = format!("hermite_A N={n}");
            Ok((WeightSetup::Spec { weight: w, lambda, hermite: Some(p) }, label))
        }
        WeightConfig::CustomMoments { moments, deformation } => {
            if moments.is_empty() {
                bail!("field 'moments': must be non-empty");
            }
            let mats = moments
                .iter()
                .enumerate()
                .map(|(k, m)| matrix_from_config(m, &format!("moments[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            let size = mats[0].rows();
            let lambda = deformation.as_ref().map(|d| d.resolve(size, None)).transpose()?;
            Ok((
                WeightSetup::Moments { moments: mats, lambda },
                format!("custom moments N={size}"),
            ))
        }
    }
}

/// Default node count: exactness headroom (`nmax + k + 5`) suffices when the
/// deformed integrands stay polynomial (the Casimir conjugates to a constant
/// through the nilpotent factors, so that case is detected structurally).
/// Exponential deformations only saturate, so they get generous floors; the
/// moment saturation check still catches anything insufficient.
fn default_quad_points(setup: &WeightSetup, nmax: usize) -> usize {
    use mvop_core::weight::coeff_distance;
    let k = setup.bandwidth().max(1);
    let exact = nmax + k + 5;
    match setup {
        WeightSetup::Spec { weight, hermite, .. } => {
            let is_casimir = hermite
                .as_ref()
                .is_some_and(|p| coeff_distance(weight.deformation(), &casimir(p)) == 0.0);
            if is_casimir || weight.deformation().degree() == 0 {
                exact
            } else if weight.deformation().degree() >= 2 {
                exact.max(96)
            } else {
                exact.max(48)
            }
        }
        WeightSetup::Moments { .. } => exact,
    }
}

pub fn resolve(file: Option<FileConfig>, flags: FlagOverrides) -> Result<RunConfig> {
    let file = file.unwrap_or_default();
    let a_params = flags.a_params.as_deref().or(file.a_params.as_deref());

    let (setup, label) = if let Some(name) = flags.preset.as_deref().or(file.preset.as_deref()) {
        preset_setup(name, a_params)?
    } else if let Some(wc) = &file.weight {
        weight_setup_from_config(wc, a_params)?
    } else {
        bail!("no weight selected: pass --preset or a config file with a 'weight' or 'preset' field");
    };

    let nmax = flags.nmax.or(file.nmax).unwrap_or(8);
    if nmax < setup.bandwidth() {
        bail!("field 'nmax': {nmax} is smaller than the deformation bandwidth {}", setup.bandwidth());
    }
    let quad_points = flags
        .quad_points
        .or(file.quad_points)
        .unwrap_or_else(|| default_quad_points(&setup, nmax));
    let fd_h = flags.fd_h.or(file.fd_h).unwrap_or(1e-4);
    if fd_h <= 0.0 {
        bail!("field 'fd_h': must be positive, got {fd_h}");
    }
    let t = flags.t.or(file.t).unwrap_or(0.0);
    let t0 = flags.t0.or(file.t0).unwrap_or(0.0);
    let t1 = flags.t1.or(file.t1).unwrap_or(0.5);
    let steps = flags.steps.or(file.steps).unwrap_or(50);

    let mut tol = Tolerances::default();
    if let Some(o) = &file.tolerances {
        tol.apply(o);
    }

    Ok(RunConfig {
        setup,
        label,
        nmax,
        quad_points,
        t,
        t0,
        t1,
        steps,
        fd_h,
        out: flags.out.or(file.out.map(PathBuf::from)),
        no_header: flags.no_header,
        tol,
    })
}

pub fn load_file(path: &std::path::Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow!("malformed config {}: {e}", path.display()))
}
