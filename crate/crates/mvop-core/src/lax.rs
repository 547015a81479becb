//! Lax-pair form of the band flows: finite truncations of the semi-infinite
//! block matrices `L_{i,j} = G_{j-i}(i;t)` and its block-upper part `L+`,
//! with the bracket `[L, L+] = L L+ - L+ L`.
//!
//! The bottom boundary (row 0) is genuine; only the top of the truncation is
//! artificial. Residuals are therefore measured on interior rows where no
//! truncation artifact can enter.

use crate::diffop::{compute_g, BandedDifferenceOperator};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::linalg::CMatrix;
use crate::mvop::build_family;
use crate::quadrature::QuadratureRule;
use crate::weight::{MatrixPolynomial, WeightSpec};

/// Finite truncation of a semi-infinite block band matrix, stored dense.
#[derive(Debug, Clone)]
pub struct BlockBandMatrix {
    block_size: usize,
    nblocks: usize,
    bandwidth: usize,
    blocks: Vec<CMatrix>,
}

impl BlockBandMatrix {
    fn zeros(block_size: usize, nblocks: usize, bandwidth: usize) -> Self {
        BlockBandMatrix {
            block_size,
            nblocks,
            bandwidth,
            blocks: vec![CMatrix::zeros(block_size, block_size); nblocks * nblocks],
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn nblocks(&self) -> usize {
        self.nblocks
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn block(&self, i: usize, j: usize) -> &CMatrix {
        &self.blocks[i * self.nblocks + j]
    }

    fn block_mut(&mut self, i: usize, j: usize) -> &mut CMatrix {
        &mut self.blocks[i * self.nblocks + j]
    }

    /// Block rows unaffected by the top truncation (the bottom row is a true
    /// boundary): `k <= i <= nblocks - 1 - k`.
    pub fn interior_rows(&self) -> std::ops::RangeInclusive<usize> {
        self.bandwidth..=self.nblocks.saturating_sub(1 + self.bandwidth)
    }

    /// Keeps blocks with `i <= j`, zeroing the strictly lower part.
    pub fn upper_part(&self) -> BlockBandMatrix {
        let mut out = Self::zeros(self.block_size, self.nblocks, self.bandwidth);
        for i in 0..self.nblocks {
            for j in i..self.nblocks {
                *out.block_mut(i, j) = self.block(i, j).clone();
            }
        }
        out
    }
}

/// Assembles `L` and `L+` from operator bands. Only fully populated rows are
/// included, so `nblocks` may not exceed `nmax - k + 1`.
pub fn assemble(
    op: &BandedDifferenceOperator,
    nblocks: usize,
) -> Result<(BlockBandMatrix, BlockBandMatrix)> {
    let k = op.bandwidth();
    if nblocks == 0 {
        return Err(Error::Parameter("assemble needs at least one block".into()));
    }
    if nblocks + k > op.nmax() + 1 {
        return Err(Error::Window(format!(
            "nblocks = {nblocks} needs rows beyond the populated window (nmax = {}, k = {k})",
            op.nmax()
        )));
    }
    let mut l = BlockBandMatrix::zeros(op.size(), nblocks, k);
    for i in 0..nblocks {
        for j in 0..nblocks {
            let d = j as i64 - i as i64;
            if d.abs() > k as i64 {
                continue;
            }
            match op.stored(d, i) {
                Some(g) => *l.block_mut(i, j) = g.clone(),
                None => {
                    return Err(Error::Window(format!(
                        "band {d} unavailable at row {i}; cannot assemble"
                    )))
                }
            }
        }
    }
    let lplus = l.upper_part();
    Ok((l, lplus))
}

/// `L L+ - L+ L`. Every block is computed; truncation-affected rows are the
/// callers' concern via [`BlockBandMatrix::interior_rows`].
pub fn bracket(l: &BlockBandMatrix, lplus: &BlockBandMatrix) -> BlockBandMatrix {
    assert_eq!(l.nblocks, lplus.nblocks, "matching dimensions required");
    assert_eq!(l.block_size, lplus.block_size, "matching block sizes required");
    let n = l.nblocks;
    let size = l.block_size;
    let k = l.bandwidth;
    let mut out = BlockBandMatrix::zeros(size, n, k);
    let rows: Vec<Vec<CMatrix>> = map_indexed(n, |i| {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = CMatrix::zeros(size, size);
            // s-range covering both band products; zero blocks outside the
            // bands drop out, and both products share the same ordered range
            // so off-band cancellation is float-exact
            let lo = i.min(j).saturating_sub(k);
            let hi = (i.max(j) + k).min(n - 1);
            for s in lo..=hi {
                acc = &acc + &(l.block(i, s) * lplus.block(s, j));
                acc = &acc - &(lplus.block(i, s) * l.block(s, j));
            }
            row.push(acc);
        }
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        for (j, b) in row.into_iter().enumerate() {
            *out.block_mut(i, j) = b;
        }
    }
    out
}

/// Finite-difference verification of the Lax equation
/// `Ldot = [L, L+]` on interior rows.
#[derive(Debug, Clone)]
pub struct LaxReport {
    pub max_residual: f64,
    pub interior: (usize, usize),
    pub pass: bool,
}

pub const LAX_FD_TOL: f64 = 5e-6;

/// Rebuilds `L(t +- h)` from scratch and compares the central difference
/// against the bracket at t. The weight's deformation is replaced by
/// `lambda`, matching the flow the Lax pair encodes.
pub fn verify_lax(
    w: &WeightSpec,
    lambda: &MatrixPolynomial,
    t: f64,
    h: f64,
    nblocks: usize,
    rule: &QuadratureRule,
) -> Result<LaxReport> {
    if h <= 0.0 {
        return Err(Error::Parameter("fd step h must be positive".into()));
    }
    let k = lambda.degree();
    let nmax = nblocks + k; // one spare row beyond the assembly requirement
    let w = w.with_deformation(lambda.clone())?;
    let mut mats = Vec::with_capacity(3);
    for &tt in &[t - h, t, t + h] {
        let fam = build_family(&w, tt, nmax, rule)?;
        let op = compute_g(&fam, lambda, rule)?;
        let (l, _) = assemble(&op, nblocks)?;
        mats.push(l);
    }
    let lplus = mats[1].upper_part();
    let br = bracket(&mats[1], &lplus);
    let interior = br.interior_rows();
    let (lo, hi) = (*interior.start(), *interior.end());
    let mut max_residual = 0.0f64;
    for i in lo..=hi {
        for j in 0..nblocks {
            if (j as i64 - i as i64).abs() > k as i64 {
                continue;
            }
            let fd = (mats[2].block(i, j) - mats[0].block(i, j)).scale_re(0.5 / h);
            let resid = (&fd - br.block(i, j)).norm_max()
                / mats[1].block(i, j).norm_max().max(1.0);
            max_residual = max_residual.max(resid);
        }
    }
    Ok(LaxReport { max_residual, interior: (lo, hi), pass: max_residual <= LAX_FD_TOL })
}
