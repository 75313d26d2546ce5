//! Visible parts of a depth-`n` approximation `E_n`.
//!
//! Squares are swept front to back; a square is marked when the part of its
//! shadow not covered by nearer squares has positive length, and the longest
//! such piece is kept as its witness window. Point covers are always certified
//! by shooting a ray through every window; if any ray hits a different square
//! first, the cover is recomputed with the exact elementary-arc algorithm.

mod elementary;
mod io;
mod oracle;
mod witness;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::exactgeom::{lattice_arc, lattice_depth, lattice_shadow, shadow_arc, Direction, Interval, IntervalUnion, Side, Viewpoint};
use crate::grid::{grid_side, DyadicSquare, PercParams, PercolationTree};
use crate::scalar::Scalar;

pub use elementary::elementary_cover;
pub use io::CoverFile;
pub use oracle::{audit_discrepancies, ray_cast_oracle, Discrepancy, DiscrepancyKind, OracleResult};
pub use witness::{certify, first_hit_in_tree, witness_ray, CertReport};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SightSpec {
    Line { d: Direction, side: Side },
    Point { x: Viewpoint },
}

impl SightSpec {
    pub fn line(a: i64, b: i64, side: Side) -> Result<Self> {
        Ok(SightSpec::Line { d: Direction::new(a, b)?, side })
    }

    pub fn point(x1: Scalar, x2: Scalar) -> Result<Self> {
        Ok(SightSpec::Point { x: Viewpoint::new(x1, x2)? })
    }

    /// Parses `a,b,side` (integers or rationals; side `+` or `-`).
    pub fn parse_line(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let [a, b, side] = parts[..] else {
            bail!(Param, "line sight must look like `a,b,+`, got `{text}`");
        };
        let (a, b) = (parse_scalar(a)?, parse_scalar(b)?);
        Ok(SightSpec::Line { d: Direction::from_rationals(&a, &b)?, side: side.parse()? })
    }

    /// Parses `x1,x2`.
    pub fn parse_point(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let [x1, x2] = parts[..] else {
            bail!(Param, "point sight must look like `x1,x2`, got `{text}`");
        };
        SightSpec::point(parse_scalar(x1)?, parse_scalar(x2)?)
    }

    /// Mirror image under `x ↦ 1 − x`.
    pub fn reflect_x(&self) -> SightSpec {
        match self {
            SightSpec::Line { d, side } => SightSpec::Line { d: d.reflect_x(), side: *side },
            SightSpec::Point { x } => SightSpec::Point { x: x.reflect_x() },
        }
    }
}

fn parse_scalar(s: &str) -> Result<Scalar> {
    s.parse().map_err(|e| Error::Param(format!("{e}")))
}

impl fmt::Display for SightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SightSpec::Line { d, side } => write!(f, "line d={d} side={side}"),
            SightSpec::Point { x } => write!(f, "point x={x}"),
        }
    }
}

/// What happened when a point cover failed certification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepAudit {
    pub fast_marked: usize,
    pub witness_failures: Vec<DyadicSquare>,
    /// Squares the exact recomputation marked that the sweep missed.
    pub added: Vec<DyadicSquare>,
    /// Squares the sweep marked that the exact recomputation did not.
    pub removed: Vec<DyadicSquare>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleCover {
    pub params: PercParams,
    pub sight: SightSpec,
    pub level: u32,
    /// Sorted by `(ix, iy)`.
    pub marked: Vec<DyadicSquare>,
    /// For each marked square, an uncovered piece of its shadow (line case, in
    /// the `⟨·, d⊥⟩` coordinate) or of its arc (point case, in the viewpoint's
    /// arc frame).
    pub windows: Vec<Interval<Scalar>>,
    /// `counts[j] = N_j`, the number of distinct level-`j` ancestors of marked squares.
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<SweepAudit>,
}

impl VisibleCover {
    fn assemble(
        tree: &PercolationTree,
        sight: SightSpec,
        n: u32,
        mut marked: Vec<(DyadicSquare, Interval<Scalar>)>,
    ) -> VisibleCover {
        marked.sort_by_key(|a| a.0);
        let cells: Vec<(u64, u64)> = marked.iter().map(|(s, _)| (s.ix, s.iy)).collect();
        let counts = ancestor_counts(&cells, n, tree.m());
        let (marked, windows) = marked.into_iter().unzip();
        VisibleCover { params: tree.params().clone(), sight, level: n, marked, windows, counts, audit: None }
    }

    pub fn window_of(&self, sq: &DyadicSquare) -> Option<&Interval<Scalar>> {
        self.marked.binary_search(sq).ok().map(|i| &self.windows[i])
    }

    pub fn is_marked(&self, sq: &DyadicSquare) -> bool {
        self.marked.binary_search(sq).is_ok()
    }
}

/// `N_j` for `j = 0..=n`: distinct level-`j` ancestors of level-`n` cells.
pub fn ancestor_counts(cells: &[(u64, u64)], n: u32, m: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut buf: Vec<(u64, u64)> = cells.to_vec();
    for _ in 0..=n {
        buf.sort_unstable();
        buf.dedup();
        out.push(buf.len() as u64);
        for c in buf.iter_mut() {
            *c = (c.0 / m as u64, c.1 / m as u64);
        }
    }
    out.reverse();
    out
}

fn cells_of(tree: &PercolationTree, n: u32) -> Result<(&[(u32, u32)], i64)> {
    let cells = tree.level(n)?;
    let side = grid_side(tree.m(), n)?;
    Ok((cells, side as i64))
}

/// Front-to-back sweep along the travel direction `side·d`.
pub fn visible_from_line(tree: &PercolationTree, n: u32, d: &Direction, side: Side) -> Result<VisibleCover> {
    let (cells, s) = cells_of(tree, n)?;
    let t = side.travel(d);
    let mut order: Vec<(i64, u32, u32)> =
        cells.iter().map(|&(x, y)| (lattice_depth(x as i64, y as i64, &t), x, y)).collect();
    order.sort_unstable();
    let mut covered: IntervalUnion<i64> = IntervalUnion::new();
    let mut marked = Vec::new();
    for &(_, x, y) in &order {
        let shadow = lattice_shadow(x as i64, y as i64, d);
        if covered.contains_interval(&shadow) {
            continue;
        }
        let pieces = covered.uncovered_part(&shadow);
        if let Some(best) = longest(&pieces, |p| p.length()) {
            let sq = DyadicSquare { level: n, ix: x as u64, iy: y as u64 };
            marked.push((sq, best.to_scalar(s)));
        }
        covered.insert(shadow);
    }
    Ok(VisibleCover::assemble(tree, SightSpec::Line { d: *d, side }, n, marked))
}

/// The first longest piece.
fn longest<T: Clone, L: Ord>(pieces: &[T], len: impl Fn(&T) -> L) -> Option<T> {
    let mut best: Option<&T> = None;
    for p in pieces {
        if best.is_none_or(|b| len(p) > len(b)) {
            best = Some(p);
        }
    }
    best.cloned()
}

/// Shadow arc of a level-`n` cell, with the lattice fast path when available.
pub(crate) fn cell_arc(x: &Viewpoint, lat: Option<(i128, i128, i128)>, ix: u64, iy: u64, n: u32, m: u32, s: i64) -> Result<Interval<Scalar>> {
    match lat {
        Some(l) => Ok(lattice_arc(x.frame().axis, l, ix as i64, iy as i64, s)),
        None => shadow_arc(&DyadicSquare { level: n, ix, iy }, x, m),
    }
}

/// The center-distance sweep alone, without certification.
pub fn point_sweep(tree: &PercolationTree, n: u32, x: &Viewpoint) -> Result<VisibleCover> {
    let (cells, s) = cells_of(tree, n)?;
    let m = tree.m();
    let lat = x.lattice().filter(|_| s < 1 << 31);
    let two_s = Scalar::from(2 * s as i128);
    let dist = |ix: u32, iy: u32| {
        let cx = Scalar::from(2 * ix as i128 + 1) / &two_s - x.x1();
        let cy = Scalar::from(2 * iy as i128 + 1) / &two_s - x.x2();
        &cx * &cx + &cy * &cy
    };
    let mut order: Vec<(Scalar, u32, u32)> = cells.iter().map(|&(ix, iy)| (dist(ix, iy), ix, iy)).collect();
    order.sort();
    let mut covered: IntervalUnion<Scalar> = IntervalUnion::new();
    let mut marked = Vec::new();
    for (_, ix, iy) in order {
        let arc = cell_arc(x, lat, ix as u64, iy as u64, n, m, s)?;
        if covered.contains_interval(&arc) {
            continue;
        }
        let pieces = covered.uncovered_part(&arc);
        if let Some(best) = longest(&pieces, |p| p.length()) {
            marked.push((DyadicSquare { level: n, ix: ix as u64, iy: iy as u64 }, best));
        }
        covered.insert(arc);
    }
    Ok(VisibleCover::assemble(tree, SightSpec::Point { x: x.clone() }, n, marked))
}

/// Center-distance sweep, certified; falls back to the exact elementary-arc
/// algorithm when a witness fails and records the discrepancy in `audit`.
pub fn visible_from_point(tree: &PercolationTree, n: u32, x: &Viewpoint) -> Result<VisibleCover> {
    let fast = point_sweep(tree, n, x)?;
    let report = certify(&fast, tree)?;
    if report.failures.is_empty() {
        return Ok(fast);
    }
    let sight = SightSpec::Point { x: x.clone() };
    let mut exact = elementary_cover(tree, n, &sight)?;
    let exact_report = certify(&exact, tree)?;
    if !exact_report.failures.is_empty() {
        bail!(Certification, "exact recomputation failed to certify {} squares", exact_report.failures.len());
    }
    let added = exact.marked.iter().filter(|s| !fast.is_marked(s)).copied().collect();
    let removed = fast.marked.iter().filter(|s| !exact.is_marked(s)).copied().collect();
    exact.audit = Some(SweepAudit { fast_marked: fast.marked.len(), witness_failures: report.failures, added, removed });
    Ok(exact)
}

/// Dispatches on the sight.
pub fn visible_cover(tree: &PercolationTree, n: u32, sight: &SightSpec) -> Result<VisibleCover> {
    match sight {
        SightSpec::Line { d, side } => visible_from_line(tree, n, d, *side),
        SightSpec::Point { x } => visible_from_point(tree, n, x),
    }
}
