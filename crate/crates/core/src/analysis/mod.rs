//! Scaling and structure statistics of percolation trees and their visible parts.

mod block;
mod carve;
mod coverage;
mod stripe;

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::grid::{DyadicSquare, PercolationTree};
use crate::scalar::Scalar;
use crate::visibility::{ancestor_counts, SightSpec, VisibleCover};

pub use block::{is_block, BlockCache};
pub use carve::{carve, carved_projection, is_corner, CarveMode, CarvedRegion, SlopeSign};
pub use coverage::{count_passed, count_shadow_hits, projection_coverage, radial_coverage};
pub use stripe::{
    default_stripe_eps, stripe_cover_count, stripe_decomposition, stripe_squares, visible_length_estimate,
    LengthEstimate, Stripe, StripeCount, StripeLayout, StripeProcess, StripeRow,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingMeta {
    pub p: Scalar,
    #[serde(rename = "M")]
    pub m: u32,
    pub n: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sight: Option<SightSpec>,
}

/// Rows `(k, N_k)` for a contiguous range of `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub meta: ScalingMeta,
    pub rows: Vec<(u32, u64)>,
}

impl ScalingTable {
    /// `N_k(E_n)` for `k = 0..=n`.
    pub fn of_tree(tree: &PercolationTree, n: u32) -> Result<Self> {
        let cells: Vec<(u64, u64)> = tree.level(n)?.iter().map(|&(x, y)| (x as u64, y as u64)).collect();
        let counts = ancestor_counts(&cells, n, tree.m());
        let prm = tree.params();
        let meta = ScalingMeta { p: prm.p.clone(), m: prm.m, n, seed: prm.seed, sight: None };
        Ok(ScalingTable::from_counts(meta, &counts))
    }

    /// `N_k` of the marked squares of a visible cover.
    pub fn of_cover(cover: &VisibleCover) -> Self {
        let prm = &cover.params;
        let meta =
            ScalingMeta { p: prm.p.clone(), m: prm.m, n: cover.level, seed: prm.seed, sight: Some(cover.sight.clone()) };
        ScalingTable::from_counts(meta, &cover.counts)
    }

    fn from_counts(meta: ScalingMeta, counts: &[u64]) -> Self {
        let rows = counts.iter().enumerate().map(|(k, &c)| (k as u32, c)).collect();
        ScalingTable { meta, rows }
    }

    pub fn count(&self, k: u32) -> Option<u64> {
        self.rows.iter().find(|r| r.0 == k).map(|r| r.1)
    }

    /// CSV with header `k,N_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,N_k\n");
        for (k, c) in &self.rows {
            out.push_str(&format!("{k},{c}\n"));
        }
        out
    }
}

/// Number of distinct level-`k` ancestors of level-`n` squares.
pub fn box_count(squares: &[DyadicSquare], k: u32, m: u32) -> Result<u64> {
    let Some(first) = squares.first() else {
        return Ok(0);
    };
    let n = first.level;
    if squares.iter().any(|s| s.level != n) {
        bail!(Param, "box counting needs squares of a single level");
    }
    if k > n {
        bail!(Range, "box level {k} is finer than the squares' level {n}");
    }
    let f = (m as u64).pow(n - k);
    let mut cells: Vec<(u64, u64)> = squares.iter().map(|s| (s.ix / f, s.iy / f)).collect();
    cells.sort_unstable();
    cells.dedup();
    Ok(cells.len() as u64)
}

/// Least-squares fit of `log_M N_k` against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub points: usize,
}

/// `log2 v` split as `(e, f)` with `v = 2^e · 2^f`, `f ∈ [0, 1)`.
fn split_log2(v: u64) -> (i64, f64) {
    let e = 63 - v.leading_zeros() as i64;
    let mantissa = v as f64 / (e as f64).exp2();
    (e, mantissa.log2())
}

/// Slope of `log N_k / log M` against `k` over `ks`. The integer and
/// fractional parts of `log2 N_k` are regressed separately, so counts of the
/// form `c·2^{jk}` give the exact slope `j`.
pub fn dim_slope(table: &ScalingTable, ks: RangeInclusive<u32>) -> Result<SlopeFit> {
    let rows: Vec<(u32, u64)> = table.rows.iter().copied().filter(|r| ks.contains(&r.0)).collect();
    if rows.iter().any(|r| r.1 == 0) {
        bail!(Domain, "empty box count in range {}..={}", ks.start(), ks.end());
    }
    if rows.len() < 3 {
        bail!(Domain, "slope fit needs at least 3 levels, got {}", rows.len());
    }
    let n = rows.len() as i128;
    let logs: Vec<(i64, f64)> = rows.iter().map(|r| split_log2(r.1)).collect();
    let sx: i128 = rows.iter().map(|r| r.0 as i128).sum();
    let sxx: i128 = rows.iter().map(|r| (r.0 as i128).pow(2)).sum();
    let se: i128 = logs.iter().map(|l| l.0 as i128).sum();
    let sxe: i128 = rows.iter().zip(&logs).map(|(r, l)| r.0 as i128 * l.0 as i128).sum();
    let den = n * sxx - sx * sx;
    let xbar = sx as f64 / n as f64;
    let fbar = logs.iter().map(|l| l.1).sum::<f64>() / n as f64;
    let sxf: f64 = rows.iter().zip(&logs).map(|(r, l)| (r.0 as f64 - xbar) * (l.1 - fbar)).sum();
    let slope2 = (n * sxe - sx * se) as f64 / den as f64 + sxf * n as f64 / den as f64;
    let log2_m = (table.meta.m as f64).log2();
    let slope = slope2 / log2_m;
    let ebar = se as f64 / n as f64;
    let intercept = (ebar + fbar - slope2 * xbar) / log2_m;
    let mut max_residual: f64 = 0.0;
    for (r, l) in rows.iter().zip(&logs) {
        let dx = r.0 as f64 - xbar;
        let resid = ((l.0 as f64 - ebar) + (l.1 - fbar) - slope2 * dx) / log2_m;
        max_residual = max_residual.max(resid.abs());
    }
    Ok(SlopeFit { slope, intercept, max_residual, points: rows.len() })
}

/// `log(M²p) / log M`, or 0 when `M²p ≤ 1`.
pub fn theoretical_dim(p: &Scalar, m: u32) -> f64 {
    let mass = p.to_f64() * (m as f64).powi(2);
    if mass <= 1.0 {
        return 0.0;
    }
    mass.log2() / (m as f64).log2()
}

/// `1/2 + √(d − 3/4)`.
pub fn oneil_bound(d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.75 {
        bail!(Domain, "dimension {d} is below 3/4");
    }
    Ok(0.5 + (d - 0.75).sqrt())
}
