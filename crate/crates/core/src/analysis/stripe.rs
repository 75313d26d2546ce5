//! Stripes of the shadow axis and the squares whose centres project into them.
//!
//! Shadow coordinates are `⟨·, (−b, a)⟩` for the view direction `(a, b)`; a
//! stripe of normalised length `ε·M^{-n}` therefore has unnormalised width
//! `ε·M^{-n}·|d|`. `|d|` is replaced by the rational lower bound
//! `⌊|d|·2^20⌋ / 2^20`, which keeps stripes exact and only makes them thinner.

use serde::{Deserialize, Serialize};

use super::block::BlockCache;
use super::carve::{is_corner, SlopeSign};
use crate::error::{bail, Result};
use crate::exactgeom::{lattice_depth, lattice_shadow, Direction, Interval, Side};
use crate::grid::{ancestor, grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;

const NORM_SCALE: i128 = 1 << 20;

/// `[lo, hi)`, or `[lo, hi]` for the last stripe of a layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stripe {
    pub index: usize,
    pub lo: Scalar,
    pub hi: Scalar,
    pub closed: bool,
}

impl Stripe {
    pub fn contains(&self, v: &Scalar) -> bool {
        self.lo <= *v && (*v < self.hi || (self.closed && *v == self.hi))
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !self.closed)
    }
}

/// Partition of the shadow extent of the unit square into stripes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeLayout {
    pub d: Direction,
    pub side: Side,
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u32,
    pub eps: Scalar,
    pub width: Scalar,
    pub extent: Interval<Scalar>,
    pub count: usize,
}

/// `|ab| / (2(a² + b²))`, the exclusive upper bound on the stripe parameter.
fn eps_bound(d: &Direction) -> Scalar {
    let (a, b) = (d.a() as i128, d.b() as i128);
    Scalar::ratio((a * b).abs(), 2 * (a * a + b * b))
}

/// Largest `2^{-j}` strictly below the bound for `d`.
pub fn default_stripe_eps(d: &Direction) -> Result<Scalar> {
    let bound = eps_bound(d);
    if bound.is_zero() {
        bail!(Domain, "axis direction {d} admits no stripe width");
    }
    let mut eps = Scalar::ratio(1, 2);
    while eps >= bound {
        eps = eps * Scalar::ratio(1, 2);
    }
    Ok(eps)
}

pub fn stripe_decomposition(d: &Direction, side: Side, n: u32, m: u32, eps: &Scalar) -> Result<StripeLayout> {
    if eps.signum() <= 0 || *eps >= eps_bound(d) {
        bail!(Domain, "stripe parameter {eps} is not in (0, {}) for direction {d}", eps_bound(d));
    }
    let s = grid_side(m, n)?;
    if s > 1 << 24 {
        bail!(Range, "stripe level {n} is too deep");
    }
    let (a, b) = (d.a() as i128, d.b() as i128);
    let norm2 = (a * a + b * b) as u128;
    let root = (norm2 * (NORM_SCALE * NORM_SCALE) as u128).isqrt() as i128;
    let width = eps * &Scalar::ratio(root, NORM_SCALE * s as i128);
    let ext = lattice_shadow(0, 0, d);
    let extent = Interval { lo: Scalar::from(ext.lo as i128), hi: Scalar::from(ext.hi as i128) };
    let count = (extent.length() / &width).ceil_i128().unwrap_or(0);
    if count <= 0 || count > 1 << 32 {
        bail!(Range, "stripe count {count} is out of range");
    }
    Ok(StripeLayout { d: *d, side, n, m, eps: eps.clone(), width, extent, count: count as usize })
}

impl StripeLayout {
    pub fn stripe(&self, j: usize) -> Stripe {
        let lo = &self.extent.lo + &self.width * Scalar::from(j as i128);
        let next = &lo + &self.width;
        let last = j + 1 == self.count;
        let hi = if last { self.extent.hi.clone() } else { next };
        Stripe { index: j, lo, hi, closed: last }
    }

    pub fn stripes(&self) -> Vec<Stripe> {
        (0..self.count).map(|j| self.stripe(j)).collect()
    }

    /// Stripe index of the centre of the level-`n` cell `(ix, iy)`.
    fn index_of(&self, ix: u64, iy: u64, scale: &(i128, i128, i128)) -> usize {
        let (offset, num, den) = *scale;
        let (a, b) = (self.d.a() as i128, self.d.b() as i128);
        let key = -b * (2 * ix as i128 + 1) + a * (2 * iy as i128 + 1);
        let j = ((key - offset) * num).div_euclid(den);
        (j.max(0) as usize).min(self.count - 1)
    }

    /// `(2S·lo, num, den)` with `index = ⌊(key − 2S·lo)·num/den⌋`, where
    /// `key/(2S)` is a centre's shadow coordinate and `num/den = 1/(2S·width)`.
    fn index_scale(&self) -> Result<(i128, i128, i128)> {
        let s = grid_side(self.m, self.n)? as i128;
        let Some(lo) = self.extent.lo.as_i128_pair().map(|p| p.0) else {
            bail!(Range, "stripe extent is not integral");
        };
        let twice = &self.width * Scalar::from(2 * s);
        let Some((wn, wd)) = twice.as_i128_pair() else {
            bail!(Range, "stripe width does not fit the lattice");
        };
        Ok((2 * s * lo, wd, wn))
    }

    /// Every stripe's process on `tree`, in stripe order.
    pub fn processes(&self, tree: &PercolationTree) -> Result<Vec<StripeProcess>> {
        if self.n < 2 {
            bail!(Range, "stripe processes need level ≥ 2, got {}", self.n);
        }
        if tree.m() != self.m {
            bail!(Param, "layout base {} does not match tree base {}", self.m, tree.m());
        }
        let s = grid_side(self.m, self.n)?;
        let scale = self.index_scale()?;
        let travel = self.side.travel(&self.d);
        let mut buckets: Vec<Vec<(i64, u64, u64)>> = vec![Vec::new(); self.count];
        for ix in 0..s {
            for iy in 0..s {
                let key = lattice_depth(ix as i64, iy as i64, &travel);
                buckets[self.index_of(ix, iy, &scale)].push((key, ix, iy));
            }
        }
        let sign = SlopeSign::of(&self.d);
        let level = tree.level(self.n)?;
        let mut out = Vec::with_capacity(self.count);
        for (j, mut bucket) in buckets.into_iter().enumerate() {
            bucket.sort_unstable();
            let all = bucket.into_iter().map(|(_, ix, iy)| DyadicSquare { level: self.n, ix, iy }).collect();
            out.push(StripeProcess::build(self.stripe(j), all, level, sign, self.m)?);
        }
        Ok(out)
    }
}

/// Ordered squares above one stripe: `all` is every level-`n` square whose
/// centre projects into the stripe, nearest to the source line first, ties
/// broken by `(ix, iy)`; `chosen` keeps the retained ones in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeProcess {
    pub stripe: Stripe,
    pub all: Vec<DyadicSquare>,
    pub chosen: Vec<DyadicSquare>,
    /// Corner indicator of each chosen square.
    pub corners: Vec<bool>,
    /// `partial[i]` is the number of corners among `chosen[..=i]`.
    pub partial: Vec<u32>,
}

impl StripeProcess {
    fn build(stripe: Stripe, all: Vec<DyadicSquare>, level: &[(u32, u32)], sign: SlopeSign, m: u32) -> Result<Self> {
        let chosen: Vec<DyadicSquare> = all
            .iter()
            .filter(|s| level.binary_search(&(s.ix as u32, s.iy as u32)).is_ok())
            .copied()
            .collect();
        let corners = chosen.iter().map(|s| is_corner(s, sign, m)).collect::<Result<Vec<bool>>>()?;
        let partial = corners
            .iter()
            .scan(0u32, |acc, &z| {
                *acc += z as u32;
                Some(*acc)
            })
            .collect();
        Ok(StripeProcess { stripe, all, chosen, corners, partial })
    }

    /// Walks the chosen squares to the first non-corner whose grandparent is a
    /// block. The covering set is every chosen square up to it plus the later
    /// ones sharing its grandparent; without a block it is all of them.
    pub fn cover(&self, blocks: &mut BlockCache<'_>, m: u32) -> Result<(StripeCount, Vec<DyadicSquare>)> {
        for (i, sq) in self.chosen.iter().enumerate() {
            if self.corners[i] {
                continue;
            }
            let top = ancestor(sq, 2, m)?;
            if !blocks.is_block(&top)? {
                continue;
            }
            let mut squares = self.chosen[..=i].to_vec();
            squares.extend(self.chosen[i + 1..].iter().filter(|s| ancestor(s, 2, m).is_ok_and(|t| t == top)));
            let count = StripeCount { all: self.all.len(), chosen: self.chosen.len(), y: squares.len(), first_block: Some(i + 1) };
            return Ok((count, squares));
        }
        let count = StripeCount { all: self.all.len(), chosen: self.chosen.len(), y: self.chosen.len(), first_block: None };
        Ok((count, self.chosen.clone()))
    }
}

/// `Y` of one stripe and the 1-based position in `chosen` of the square that
/// induced the block, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeCount {
    pub all: usize,
    pub chosen: usize,
    pub y: usize,
    pub first_block: Option<usize>,
}

/// Level-`n` cells whose centre key `−b(2ix+1) + a(2iy+1)` lies in the stripe.
fn cells_in_stripe(d: &Direction, s: u64, stripe: &Stripe) -> Vec<(u64, u64)> {
    let two_s = Scalar::from(2 * s as i128);
    let (lo, hi) = (&stripe.lo * &two_s, &stripe.hi * &two_s);
    let (a, b) = (d.a() as i128, d.b() as i128);
    let last = s as i128 - 1;
    let mut out = Vec::new();
    for ix in 0..s as i128 {
        let c0 = -b * (2 * ix + 1) + a;
        let (first, stop) = if a == 0 {
            let c = Scalar::from(c0);
            let inside = lo <= c && (c < hi || (stripe.closed && c == hi));
            if inside { (0, last) } else { (1, 0) }
        } else {
            let step = Scalar::from(2 * a);
            let tl = (&lo - Scalar::from(c0)) / &step;
            let th = (&hi - Scalar::from(c0)) / &step;
            let ceil = |t: &Scalar| t.ceil_i128().unwrap_or(if t.signum() > 0 { i128::MAX } else { i128::MIN });
            let floor = |t: &Scalar| t.floor_i128().unwrap_or(if t.signum() > 0 { i128::MAX } else { i128::MIN });
            if a > 0 {
                let stop = if stripe.closed { floor(&th) } else { ceil(&th).saturating_sub(1) };
                (ceil(&tl), stop)
            } else {
                let first = if stripe.closed { ceil(&th) } else { floor(&th).saturating_add(1) };
                (first, floor(&tl))
            }
        };
        for iy in first.max(0)..=stop.min(last) {
            out.push((ix as u64, iy as u64));
        }
    }
    out
}

/// The process above a single stripe.
pub fn stripe_squares(tree: &PercolationTree, n: u32, d: &Direction, side: Side, stripe: &Stripe) -> Result<StripeProcess> {
    if stripe.is_empty() {
        bail!(Domain, "stripe [{}, {}] is empty", stripe.lo, stripe.hi);
    }
    if n < 2 {
        bail!(Range, "stripe processes need level ≥ 2, got {n}");
    }
    let m = tree.m();
    let s = grid_side(m, n)?;
    let travel = side.travel(d);
    let mut cells: Vec<(i64, u64, u64)> = cells_in_stripe(d, s, stripe)
        .into_iter()
        .map(|(ix, iy)| (lattice_depth(ix as i64, iy as i64, &travel), ix, iy))
        .collect();
    cells.sort_unstable();
    let all = cells.into_iter().map(|(_, ix, iy)| DyadicSquare { level: n, ix, iy }).collect();
    StripeProcess::build(stripe.clone(), all, tree.level(n)?, SlopeSign::of(d), m)
}

/// `Y` for one stripe with blocks tested at depth `m`.
pub fn stripe_cover_count(
    tree: &PercolationTree,
    n: u32,
    d: &Direction,
    side: Side,
    stripe: &Stripe,
    m: u32,
) -> Result<StripeCount> {
    let process = stripe_squares(tree, n, d, side, stripe)?;
    let mut blocks = BlockCache::new(tree, *d, m);
    Ok(process.cover(&mut blocks, tree.m())?.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeRow {
    pub j: usize,
    #[serde(flatten)]
    pub count: StripeCount,
}

/// `√2·M^{-n}·S_n` with `S_n = Σ_j Y_j`, and the per-stripe rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthEstimate {
    pub layout: StripeLayout,
    pub block_depth: u32,
    pub rows: Vec<StripeRow>,
    pub total: u64,
    pub estimate: f64,
}

impl LengthEstimate {
    /// CSV with header `j,Q_I,C_I,Y,first_block`; a missing block is empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,Q_I,C_I,Y,first_block\n");
        for r in &self.rows {
            let fb = r.count.first_block.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.j, r.count.all, r.count.chosen, r.count.y, fb));
        }
        out
    }
}

pub fn visible_length_estimate(
    tree: &PercolationTree,
    n: u32,
    d: &Direction,
    side: Side,
    eps: &Scalar,
    m: u32,
) -> Result<LengthEstimate> {
    let layout = stripe_decomposition(d, side, n, tree.m(), eps)?;
    let mut blocks = BlockCache::new(tree, *d, m);
    let mut rows = Vec::with_capacity(layout.count);
    let mut total = 0u64;
    for (j, process) in layout.processes(tree)?.into_iter().enumerate() {
        let (count, _) = process.cover(&mut blocks, tree.m())?;
        total += count.y as u64;
        rows.push(StripeRow { j, count });
    }
    let s = grid_side(tree.m(), n)? as f64;
    let estimate = std::f64::consts::SQRT_2 * total as f64 / s;
    Ok(LengthEstimate { layout, block_depth: m, rows, total, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate, PercParams};
    use crate::visibility::visible_from_line;

    fn q(n: i128, d: i128) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn dir(a: i64, b: i64) -> Direction {
        Direction::new(a, b).unwrap()
    }

    fn full(n: u32) -> PercolationTree {
        generate(&PercParams::new(Scalar::one(), 2, n, 0).unwrap()).unwrap()
    }

    #[test]
    fn eps_defaults_and_bounds() {
        assert_eq!(default_stripe_eps(&dir(1, 1)).unwrap(), q(1, 8));
        // bound 2/10 = 1/5
        assert_eq!(default_stripe_eps(&dir(1, 2)).unwrap(), q(1, 8));
        // bound 3/20
        assert_eq!(default_stripe_eps(&dir(3, 1)).unwrap(), q(1, 8));
        // bound 5/52
        assert_eq!(default_stripe_eps(&dir(5, 1)).unwrap(), q(1, 16));
        assert!(matches!(default_stripe_eps(&dir(0, 1)), Err(crate::Error::Domain(_))));
        assert!(matches!(stripe_decomposition(&dir(1, 1), Side::Plus, 4, 2, &q(1, 4)), Err(crate::Error::Domain(_))));
        assert!(matches!(stripe_decomposition(&dir(9, 1), Side::Plus, 4, 2, &q(1, 16)), Err(crate::Error::Domain(_))));
        assert!(stripe_decomposition(&dir(1, 1), Side::Plus, 4, 2, &q(1, 5)).is_ok());
    }

    #[test]
    fn decomposition_tiles_the_extent() {
        for (a, b) in [(1, 1), (1, -2), (3, 4), (-5, 2)] {
            let d = dir(a, b);
            let eps = default_stripe_eps(&d).unwrap();
            for n in [2, 5, 7] {
                let lay = stripe_decomposition(&d, Side::Plus, n, 2, &eps).unwrap();
                let st = lay.stripes();
                assert_eq!(st[0].lo, lay.extent.lo);
                assert_eq!(st.last().unwrap().hi, lay.extent.hi);
                assert!(st.last().unwrap().closed && st.iter().filter(|s| s.closed).count() == 1);
                for w in st.windows(2) {
                    assert_eq!(w[0].hi, w[1].lo);
                    assert_eq!(w[0].hi.clone() - w[0].lo.clone(), lay.width);
                }
                let last = st.last().unwrap();
                assert!(last.lo < last.hi && last.hi.clone() - last.lo.clone() <= lay.width);
                let bound = 2 * (eps.recip() * Scalar::from(1i128 << n)).ceil_i128().unwrap() + 1;
                assert!((lay.count as i128) <= bound);
                // count is ⌈extent / width⌉
                let exact = (lay.extent.length() / &lay.width).ceil_i128().unwrap();
                assert_eq!(lay.count as i128, exact);
            }
        }
        // (3, 4) has |d| = 5 exactly: 7 / (5/8 · 2^{-2}) = 44.8
        let lay = stripe_decomposition(&dir(3, 4), Side::Plus, 2, 2, &q(1, 8)).unwrap();
        assert_eq!(lay.width, q(5, 32));
        assert_eq!(lay.count, 45);
    }

    /// Stripe of every centre by direct comparison with the stripe bounds.
    fn brute_stripes(lay: &StripeLayout) -> Vec<Vec<(u64, u64)>> {
        let s = 1u64 << lay.n;
        let st = lay.stripes();
        let mut out = vec![Vec::new(); st.len()];
        for ix in 0..s {
            for iy in 0..s {
                let cx = q(2 * ix as i128 + 1, 2 * s as i128);
                let cy = q(2 * iy as i128 + 1, 2 * s as i128);
                let z = Scalar::from(-lay.d.b()) * cx + Scalar::from(lay.d.a()) * cy;
                let hits: Vec<usize> = st.iter().filter(|t| t.contains(&z)).map(|t| t.index).collect();
                assert_eq!(hits.len(), 1);
                out[hits[0]].push((ix, iy));
            }
        }
        out
    }

    #[test]
    fn bucketing_matches_bounds() {
        for (a, b) in [(1, 1), (2, -1), (-3, -4), (1, 7)] {
            let d = dir(a, b);
            let n = 5;
            let lay = stripe_decomposition(&d, Side::Minus, n, 2, &default_stripe_eps(&d).unwrap()).unwrap();
            let t = full(n);
            let procs = lay.processes(&t).unwrap();
            let brute = brute_stripes(&lay);
            for (p, want) in procs.iter().zip(&brute) {
                let mut got: Vec<(u64, u64)> = p.all.iter().map(|s| (s.ix, s.iy)).collect();
                got.sort_unstable();
                assert_eq!(&got, want);
                let single = stripe_squares(&t, n, &d, Side::Minus, &p.stripe).unwrap();
                assert_eq!(single.all, p.all);
            }
        }
    }

    #[test]
    fn processes_are_ordered_and_consistent() {
        let d = dir(2, 1);
        let t = generate(&PercParams::new(q(3, 4), 2, 6, 5).unwrap()).unwrap();
        let lay = stripe_decomposition(&d, Side::Plus, 6, 2, &q(1, 8)).unwrap();
        for p in lay.processes(&t).unwrap() {
            let keys: Vec<i64> = p.all.iter().map(|s| lattice_depth(s.ix as i64, s.iy as i64, &d)).collect();
            assert!(keys.windows(2).all(|w| w[0] <= w[1]));
            let mut it = p.all.iter();
            for c in &p.chosen {
                assert!(t.is_retained(c));
                assert!(it.any(|s| s == c));
            }
            assert_eq!(p.chosen.len(), p.all.iter().filter(|s| t.is_retained(s)).count());
            let mut x = 0;
            for (i, z) in p.corners.iter().enumerate() {
                x += *z as u32;
                assert_eq!(p.partial[i], x);
                assert!(x as usize <= i + 1);
            }
        }
        let full_t = full(4);
        let lay = stripe_decomposition(&d, Side::Plus, 4, 2, &q(1, 8)).unwrap();
        for p in lay.processes(&full_t).unwrap() {
            assert_eq!(p.all, p.chosen);
        }
    }

    #[test]
    fn no_three_consecutive_corners() {
        for (a, b) in [(1, 1), (1, -1), (1, 2), (-2, 1), (3, 1), (2, 3), (1, -5), (5, 7)] {
            let d = dir(a, b);
            let eps = default_stripe_eps(&d).unwrap();
            for n in 2..=6 {
                let lay = stripe_decomposition(&d, Side::Plus, n, 2, &eps).unwrap();
                for p in lay.processes(&full(n)).unwrap() {
                    for w in p.corners.windows(3) {
                        assert!(!(w[0] && w[1] && w[2]), "d=({a},{b}) n={n} stripe {}", p.stripe.index);
                    }
                }
            }
        }
    }

    #[test]
    fn cover_count_rules() {
        let d = dir(1, 1);
        let n = 6;
        let t = full(n);
        let lay = stripe_decomposition(&d, Side::Plus, n, 2, &q(1, 8)).unwrap();
        let mut blocks = BlockCache::new(&t, d, n + 4);
        for p in lay.processes(&t).unwrap() {
            let (c, _) = p.cover(&mut blocks, 2).unwrap();
            if p.chosen.is_empty() {
                assert_eq!((c.y, c.first_block), (0, None));
                continue;
            }
            let Some(first) = c.first_block else {
                // short edge stripes may hold only corners
                assert!(p.chosen.len() <= 2 && p.corners.iter().all(|&z| z));
                continue;
            };
            assert!(first <= 3 && !p.corners[first - 1]);
            assert!(c.y <= 6);
        }

        // a tree without any block: Q0 keeps one child on each level
        let prm = PercParams::new(Scalar::one(), 2, 3, 0).unwrap();
        let levels = vec![vec![(0, 0)], vec![(0, 0)], vec![(0, 0)], vec![(0, 0)]];
        let thin = PercolationTree::from_levels(prm, levels).unwrap();
        let lay = stripe_decomposition(&d, Side::Plus, 3, 2, &q(1, 8)).unwrap();
        let mut blocks = BlockCache::new(&thin, d, 3);
        for p in lay.processes(&thin).unwrap() {
            let (c, sq) = p.cover(&mut blocks, 2).unwrap();
            assert_eq!(c.first_block, None);
            assert_eq!(c.y, p.chosen.len());
            assert_eq!(sq, p.chosen);
        }
        let s = lay.stripes().into_iter().find(|s| s.contains(&Scalar::zero())).unwrap();
        let direct = stripe_cover_count(&thin, 3, &d, Side::Plus, &s, 3).unwrap();
        assert_eq!(direct.y, direct.chosen);
    }

    #[test]
    fn empty_stripe_is_an_error() {
        let t = full(3);
        let s = Stripe { index: 0, lo: q(1, 3), hi: q(1, 3), closed: false };
        assert!(matches!(stripe_squares(&t, 3, &dir(1, 1), Side::Plus, &s), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn length_estimate_bounds() {
        let d = dir(1, 1);
        let extinct = PercolationTree::from_levels(
            PercParams::new(q(1, 2), 2, 4, 0).unwrap(),
            vec![vec![(0, 0)], vec![], vec![], vec![], vec![]],
        )
        .unwrap();
        let e = visible_length_estimate(&extinct, 4, &d, Side::Plus, &q(1, 8), 4).unwrap();
        assert_eq!((e.total, e.estimate), (0, 0.0));

        for n in 3..=7 {
            let est = visible_length_estimate(&full(n), n, &d, Side::Plus, &q(1, 8), n + 4).unwrap();
            assert!(est.rows.iter().all(|r| r.count.y <= 6));
            let bound = 6.0 * std::f64::consts::SQRT_2 * est.layout.count as f64 / (1u64 << n) as f64;
            assert!(est.estimate <= bound);
        }

        for seed in 0..15 {
            let n = 7;
            let t = generate(&PercParams::new(q(3, 4), 2, n, seed).unwrap()).unwrap();
            let est = visible_length_estimate(&t, n, &d, Side::Plus, &q(1, 8), n + 4).unwrap();
            let vis = visible_from_line(&t, n, &d, Side::Plus).unwrap();
            let proxy = vis.marked.len() as f64 / (1u64 << n) as f64;
            assert!(est.estimate >= proxy / 4.0, "seed {seed}: {} vs {proxy}", est.estimate);
        }
    }

    #[test]
    fn stripe_cover_contains_visible_squares() {
        for (a, b) in [(1, 1), (2, 1), (1, -3), (-2, -3)] {
            let d = dir(a, b);
            let eps = default_stripe_eps(&d).unwrap();
            for side in [Side::Plus, Side::Minus] {
                for seed in 0..20 {
                    let n = 6;
                    let t = generate(&PercParams::new(q(3, 4), 2, n, seed).unwrap()).unwrap();
                    let lay = stripe_decomposition(&d, side, n, 2, &eps).unwrap();
                    let mut blocks = BlockCache::new(&t, d, n + 4);
                    let mut covered = std::collections::HashSet::new();
                    for p in lay.processes(&t).unwrap() {
                        covered.extend(p.cover(&mut blocks, 2).unwrap().1);
                    }
                    let vis = visible_from_line(&t, n, &d, side).unwrap();
                    for sq in &vis.marked {
                        assert!(covered.contains(sq), "d=({a},{b}) {side} seed {seed}: {sq}");
                    }
                }
            }
        }
    }
}
