//! Export formats: JSON documents for families, operators, block matrices
//! and residual reports, plus the trajectory CSV.
//!
//! Floats are printed with 17 significant digits so every value round-trips
//! exactly, and all maps are ordered, so identical inputs serialize to
//! byte-identical documents.

use serde::Serialize;

use crate::diffop::BandedDifferenceOperator;
use crate::lax::BlockBandMatrix;
use crate::linalg::CMatrix;
use crate::mvop::MvopFamily;
use crate::toda::LatticeState;

/// serde_json formatter printing every f64 with 17 significant digits.
struct F17Formatter;

impl serde_json::ser::Formatter for F17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes with the fixed-precision float formatter.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, F17Formatter);
    value.serialize(&mut ser).expect("export types serialize infallibly");
    String::from_utf8(out).expect("serializer emits utf-8")
}

/// Matrix as rows of [re, im] pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_json(m: &CMatrix) -> MatrixJson {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Serialize)]
pub struct FamilyExport {
    pub description: String,
    pub size: usize,
    pub nmax: usize,
    pub t: f64,
    /// polys[n][k] = coefficient of x^k in P_n.
    pub polys: Vec<Vec<MatrixJson>>,
    pub norms: Vec<MatrixJson>,
    pub recur_b: Vec<MatrixJson>,
    pub recur_c: Vec<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl FamilyExport {
    pub fn from_family(fam: &MvopFamily, description: &str) -> Self {
        let (b, c) = fam.recurrence();
        FamilyExport {
            description: description.to_string(),
            size: fam.size(),
            nmax: fam.nmax(),
            t: fam.t(),
            polys: fam
                .polys()
                .iter()
                .map(|p| p.coeffs().iter().map(matrix_json).collect())
                .collect(),
            norms: fam.norms().iter().map(matrix_json).collect(),
            recur_b: b.iter().map(matrix_json).collect(),
            recur_c: c.iter().map(matrix_json).collect(),
            generated_at: None,
        }
    }
}

#[derive(Serialize)]
pub struct BandEntryExport {
    pub j: i64,
    pub n: usize,
    pub value: MatrixJson,
}

#[derive(Serialize)]
pub struct OperatorExport {
    pub size: usize,
    pub bandwidth: usize,
    pub nmax: usize,
    pub t: f64,
    /// Available entries ordered by (j, n); truncation-lost entries omitted.
    pub entries: Vec<BandEntryExport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl OperatorExport {
    pub fn from_operator(op: &BandedDifferenceOperator) -> Self {
        let k = op.bandwidth() as i64;
        let mut entries = Vec::new();
        for j in -k..=k {
            for n in 0..=op.nmax() {
                if let Some(v) = op.stored(j, n) {
                    entries.push(BandEntryExport { j, n, value: matrix_json(v) });
                }
            }
        }
        OperatorExport {
            size: op.size(),
            bandwidth: op.bandwidth(),
            nmax: op.nmax(),
            t: op.t(),
            entries,
            generated_at: None,
        }
    }
}

#[derive(Serialize)]
pub struct BlockExport {
    pub i: usize,
    pub j: usize,
    pub value: MatrixJson,
}

#[derive(Serialize)]
pub struct BlockMatrixExport {
    pub block_size: usize,
    pub nblocks: usize,
    pub bandwidth: usize,
    /// Nonzero band blocks ordered by (i, j).
    pub blocks: Vec<BlockExport>,
}

impl BlockMatrixExport {
    pub fn from_matrix(m: &BlockBandMatrix) -> Self {
        let mut blocks = Vec::new();
        for i in 0..m.nblocks() {
            for j in 0..m.nblocks() {
                if (j as i64 - i as i64).abs() <= m.bandwidth() as i64 {
                    blocks.push(BlockExport { i, j, value: matrix_json(m.block(i, j)) });
                }
            }
        }
        BlockMatrixExport {
            block_size: m.block_size(),
            nblocks: m.nblocks(),
            bandwidth: m.bandwidth(),
            blocks,
        }
    }
}

/// One named residual check against its threshold.
#[derive(Serialize, Debug, Clone)]
pub struct ResidualCheck {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ResidualCheck {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        ResidualCheck { name: name.into(), residual, threshold, pass: residual <= threshold }
    }
}

/// Machine-readable verification report.
#[derive(Serialize, Debug, Clone)]
pub struct ResidualReport {
    pub suite: String,
    pub checks: Vec<ResidualCheck>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl ResidualReport {
    pub fn new(suite: impl Into<String>, checks: Vec<ResidualCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        ResidualReport { suite: suite.into(), checks, pass, generated_at: None }
    }
}

/// Trajectory CSV with one row per (state, band, n):
/// `t,m,n,re_0_0,im_0_0,re_0_1,...` for the N x N entries of `G_m(n)`.
/// `header_comment` prepends a `#` line (omitted for reproducible output).
pub fn trajectory_csv(states: &[LatticeState], header_comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = header_comment {
        out.push_str(&format!("# {c}\n"));
    }
    let size = states.first().map_or(0, |s| s.op().size());
    out.push_str("t,m,n");
    for r in 0..size {
        for c in 0..size {
            out.push_str(&format!(",re_{r}_{c},im_{r}_{c}"));
        }
    }
    out.push('\n');
    for state in states {
        let op = state.op();
        let k = op.bandwidth() as i64;
        for m in -k..=k {
            for n in 0..=op.nmax() {
                let Some(v) = op.stored(m, n) else { continue };
                out.push_str(&format!("{:.16e},{m},{n}", state.t()));
                for r in 0..size {
                    for c in 0..size {
                        out.push_str(&format!(",{:.16e},{:.16e}", v[(r, c)].re, v[(r, c)].im));
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_significant_digits() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let s = to_json_string(&S { x: 1.0 / 3.0 });
        assert_eq!(s, "{\"x\":3.3333333333333331e-1}");
        let reparsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(reparsed["x"].as_f64().unwrap(), 1.0 / 3.0, "round-trip exact");
    }

    #[test]
    fn matrix_json_layout() {
        let m = CMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let j = matrix_json(&m);
        assert_eq!(j[1][0], [3.0, 0.0]);
    }

    #[test]
    fn block_matrix_export_keeps_band_blocks() {
        use crate::diffop::compute_g;
        use crate::hermite::{casimir, hermite_weight, HermiteParams};
        use crate::lax::assemble;
        use crate::mvop::build_family;
        use crate::quadrature::make_gauss_hermite;
        let p = HermiteParams::new(2, vec![1.0]).unwrap();
        let w = hermite_weight(&p);
        let rule = make_gauss_hermite(18).unwrap();
        let fam = build_family(&w, 0.1, 5, &rule).unwrap();
        let op = compute_g(&fam, &casimir(&p), &rule).unwrap();
        let (l, _) = assemble(&op, 4).unwrap();
        let export = BlockMatrixExport::from_matrix(&l);
        assert_eq!(export.nblocks, 4);
        assert_eq!(export.bandwidth, 1);
        // 4 diagonal + 3 super + 3 sub blocks
        assert_eq!(export.blocks.len(), 10);
        let json = to_json_string(&export);
        assert!(json.contains("\"block_size\":2"));
    }

    #[test]
    fn residual_report_pass_logic() {
        let report = ResidualReport::new(
            "demo",
            vec![
                ResidualCheck::new("a", 1e-12, 1e-9),
                ResidualCheck::new("b", 1e-6, 1e-9),
            ],
        );
        assert!(!report.pass);
        assert!(report.checks[0].pass);
        assert!(!report.checks[1].pass);
    }
}
