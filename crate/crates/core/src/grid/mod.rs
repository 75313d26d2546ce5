//! Fractal percolation trees in base `M`.
//!
//! A tree keeps, for every level `k ≤ depth`, the sorted list of retained cells
//! `C_k`. Each child of a retained cell survives independently with
//! probability `p`, and the verdict is a pure function of the master seed and
//! the child's address, so trees are reproducible and can be extended below
//! their stored depth on demand.

mod io;
mod rng;

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::scalar::Scalar;
use rng::Decider;

pub use io::TreeFile;

/// Storage uses `u32` coordinates.
const MAX_SIDE: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercParams {
    #[serde(with = "io::lenient_scalar")]
    pub p: Scalar,
    #[serde(rename = "M")]
    pub m: u32,
    pub depth: u32,
    pub seed: u64,
}

impl PercParams {
    pub fn new(p: Scalar, m: u32, depth: u32, seed: u64) -> Result<Self> {
        let params = PercParams { p, m, depth, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.signum() <= 0 || self.p > Scalar::one() {
            bail!(Param, "retention probability {} is outside (0, 1]", self.p);
        }
        if self.m < 2 {
            bail!(Param, "subdivision base {} is below 2", self.m);
        }
        match (self.m as u64).checked_pow(self.depth) {
            Some(side) if side <= MAX_SIDE => Ok(()),
            _ => bail!(Param, "M^depth = {}^{} exceeds the supported grid size 2^31", self.m, self.depth),
        }
    }

    /// `floor(p·2^64)`; a draw `u` keeps the child iff `u < threshold`.
    fn threshold(&self) -> u128 {
        let scaled = self.p.to_big_rational() * BigInt::from(1u128 << 64);
        scaled.floor().to_integer().to_u128().expect("p is in (0, 1]")
    }

    pub(crate) fn decider(&self) -> Decider {
        Decider::new(self.seed, self.m, self.threshold())
    }

    pub fn p_f64(&self) -> f64 {
        self.p.to_f64()
    }
}

/// The closed cell `[ix, ix+1] × [iy, iy+1]` scaled by `M^{-level}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub level: u32,
    pub ix: u64,
    pub iy: u64,
}

impl DyadicSquare {
    pub const ROOT: DyadicSquare = DyadicSquare { level: 0, ix: 0, iy: 0 };

    pub fn new(level: u32, ix: u64, iy: u64, m: u32) -> Result<Self> {
        let side = grid_side(m, level)?;
        if ix >= side || iy >= side {
            bail!(Range, "cell ({ix}, {iy}) is outside the level-{level} grid of side {side}");
        }
        Ok(DyadicSquare { level, ix, iy })
    }

    /// Side length `M^{-level}`.
    pub fn side(&self, m: u32) -> Scalar {
        Scalar::from(BigInt::from(m).pow(self.level)).recip()
    }

    /// Lower-left and upper-right corners.
    pub fn bounds(&self, m: u32) -> [(Scalar, Scalar); 2] {
        let s = self.side(m);
        let x0 = Scalar::from(self.ix as i128) * &s;
        let y0 = Scalar::from(self.iy as i128) * &s;
        let x1 = &x0 + &s;
        let y1 = &y0 + &s;
        [(x0, y0), (x1, y1)]
    }

    pub fn corners(&self, m: u32) -> [(Scalar, Scalar); 4] {
        let [(x0, y0), (x1, y1)] = self.bounds(m);
        [(x0.clone(), y0.clone()), (x1.clone(), y0), (x0, y1.clone()), (x1, y1)]
    }

    pub fn parent(&self, m: u32) -> Option<DyadicSquare> {
        (self.level > 0).then(|| DyadicSquare {
            level: self.level - 1,
            ix: self.ix / m as u64,
            iy: self.iy / m as u64,
        })
    }

    pub fn contains(&self, other: &DyadicSquare, m: u32) -> bool {
        other.level >= self.level
            && ancestor(other, other.level - self.level, m).is_ok_and(|a| a == *self)
    }
}

impl fmt::Display for DyadicSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}({},{})", self.level, self.ix, self.iy)
    }
}

/// The level-`(level − levels_up)` cell containing `sq`.
pub fn ancestor(sq: &DyadicSquare, levels_up: u32, m: u32) -> Result<DyadicSquare> {
    if levels_up > sq.level {
        bail!(Range, "cannot go {levels_up} levels up from level {}", sq.level);
    }
    let f = (m as u64).pow(levels_up);
    Ok(DyadicSquare { level: sq.level - levels_up, ix: sq.ix / f, iy: sq.iy / f })
}

/// `M^level`, rejecting grids whose coordinates would not fit in `u64`.
pub fn grid_side(m: u32, level: u32) -> Result<u64> {
    match (m as u64).checked_pow(level) {
        Some(s) => Ok(s),
        None => bail!(Range, "grid {m}^{level} is too large"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationTree {
    params: PercParams,
    levels: Vec<Vec<(u32, u32)>>,
    /// Whether `levels` is exactly what `params` generate; only then can the
    /// tree be extended below `depth`.
    generated: bool,
}

impl PercolationTree {
    /// Builds a tree from explicit per-level cell lists, checking nesting and bounds.
    pub fn from_levels(params: PercParams, mut levels: Vec<Vec<(u32, u32)>>) -> Result<Self> {
        params.validate()?;
        if levels.len() != params.depth as usize + 1 {
            bail!(Format, "expected {} levels, found {}", params.depth + 1, levels.len());
        }
        if levels[0] != [(0, 0)] {
            bail!(Format, "level 0 must hold exactly the unit square");
        }
        let m = params.m;
        for (k, lvl) in levels.iter_mut().enumerate() {
            let side = (m as u64).pow(k as u32);
            lvl.sort_unstable();
            lvl.dedup();
            if let Some(&(x, y)) = lvl.iter().find(|&&(x, y)| x as u64 >= side || y as u64 >= side) {
                bail!(Format, "cell ({x}, {y}) lies outside level {k}");
            }
        }
        for k in 1..levels.len() {
            for &(x, y) in &levels[k] {
                if levels[k - 1].binary_search(&(x / m, y / m)).is_err() {
                    bail!(Format, "cell ({x}, {y}) at level {k} has no retained parent");
                }
            }
        }
        let generated = generate_levels(&params) == levels;
        Ok(PercolationTree { params, levels, generated })
    }

    pub fn params(&self) -> &PercParams {
        &self.params
    }

    pub fn depth(&self) -> u32 {
        self.params.depth
    }

    pub fn m(&self) -> u32 {
        self.params.m
    }

    pub fn is_generated(&self) -> bool {
        self.generated
    }

    pub fn levels(&self) -> &[Vec<(u32, u32)>] {
        &self.levels
    }

    /// Sorted `(ix, iy)` pairs of `C_k`.
    pub fn level(&self, k: u32) -> Result<&[(u32, u32)]> {
        self.check_level(k)?;
        Ok(&self.levels[k as usize])
    }

    fn check_level(&self, k: u32) -> Result<()> {
        if k > self.params.depth {
            bail!(Range, "level {k} exceeds tree depth {}", self.params.depth);
        }
        Ok(())
    }

    pub fn is_retained(&self, sq: &DyadicSquare) -> bool {
        if sq.level > self.params.depth {
            return false;
        }
        let (Ok(x), Ok(y)) = (u32::try_from(sq.ix), u32::try_from(sq.iy)) else {
            return false;
        };
        self.levels[sq.level as usize].binary_search(&(x, y)).is_ok()
    }

    /// Retained level-`m` cells inside `sq`, sorted. Levels below the stored
    /// depth are produced by the generator when the tree is a generated one.
    pub fn descendants(&self, sq: &DyadicSquare, m: u32) -> Result<Vec<(u64, u64)>> {
        if m < sq.level {
            bail!(Range, "descendant level {m} is above the square's level {}", sq.level);
        }
        if !self.is_retained(sq) {
            return Ok(Vec::new());
        }
        let base = self.params.m as u64;
        let stop = m.min(self.params.depth);
        let f = base.pow(stop - sq.level);
        let lvl = &self.levels[stop as usize];
        let (x0, y0) = (sq.ix * f, sq.iy * f);
        let mut cells = Vec::new();
        for x in x0..x0 + f {
            let lo = lvl.partition_point(|&c| (c.0 as u64, c.1 as u64) < (x, y0));
            let hi = lvl.partition_point(|&c| (c.0 as u64, c.1 as u64) < (x, y0 + f));
            cells.extend(lvl[lo..hi].iter().map(|&(a, b)| (a as u64, b as u64)));
        }
        if m == stop {
            return Ok(cells);
        }
        if !self.generated {
            bail!(Range, "level {m} is below the depth of a tree that was not generated from its parameters");
        }
        grid_side(self.params.m, m)?;
        let mut decider = self.params.decider();
        for k in stop..m {
            cells = expand_level(&mut decider, self.params.m, k, &cells);
        }
        Ok(cells)
    }
}

/// Children of the sorted level-`k` cells, emitted in sorted order.
fn expand_level<T>(decider: &mut Decider, m: u32, k: u32, parents: &[(T, T)]) -> Vec<(T, T)>
where
    T: Copy + Into<u64> + TryFrom<u64> + PartialEq,
    <T as TryFrom<u64>>::Error: fmt::Debug,
{
    let mu = m as u64;
    let m2 = (mu * mu) as usize;
    let mut out = Vec::new();
    let mut verdicts = Vec::new();
    let mut start = 0;
    while start < parents.len() {
        let col = parents[start].0;
        let end = start + parents[start..].iter().take_while(|c| c.0 == col).count();
        verdicts.clear();
        for &(x, y) in &parents[start..end] {
            decider.children(k + 1, x.into(), y.into(), &mut verdicts);
        }
        for a in 0..mu {
            for (j, &(x, y)) in parents[start..end].iter().enumerate() {
                for b in 0..mu {
                    if verdicts[j * m2 + (a * mu + b) as usize] {
                        let cx = T::try_from(mu * x.into() + a).unwrap();
                        let cy = T::try_from(mu * y.into() + b).unwrap();
                        out.push((cx, cy));
                    }
                }
            }
        }
        start = end;
    }
    out
}

fn generate_levels(params: &PercParams) -> Vec<Vec<(u32, u32)>> {
    let mut decider = params.decider();
    let mut levels = vec![vec![(0u32, 0u32)]];
    for k in 0..params.depth {
        let next = expand_level(&mut decider, params.m, k, &levels[k as usize]);
        levels.push(next);
    }
    levels
}

/// Generates the tree determined by `params`.
pub fn generate(params: &PercParams) -> Result<PercolationTree> {
    params.validate()?;
    Ok(PercolationTree { params: params.clone(), levels: generate_levels(params), generated: true })
}

/// `C_k` as squares, in lexicographic `(ix, iy)` order.
pub fn squares_at(tree: &PercolationTree, k: u32) -> Result<Vec<DyadicSquare>> {
    Ok(tree
        .level(k)?
        .iter()
        .map(|&(x, y)| DyadicSquare { level: k, ix: x as u64, iy: y as u64 })
        .collect())
}

pub fn is_extinct(tree: &PercolationTree, k: u32) -> Result<bool> {
    Ok(tree.level(k)?.is_empty())
}

/// Whether the tree generated by `params` has a retained cell at level `n`,
/// decided by a depth-first probe that stops at the first such cell. Agrees
/// with `!is_extinct(generate(params), n)` without materialising the tree;
/// `n` may exceed `params.depth`.
pub fn survives_to(params: &PercParams, n: u32) -> Result<bool> {
    params.validate()?;
    grid_side(params.m, n)?;
    let mut decider = params.decider();
    let mu = params.m as u64;
    let mut stack = vec![(0u32, 0u64, 0u64)];
    let mut verdicts = Vec::new();
    while let Some((k, x, y)) = stack.pop() {
        if k == n {
            return Ok(true);
        }
        verdicts.clear();
        decider.children(k + 1, x, y, &mut verdicts);
        for (local, &keep) in verdicts.iter().enumerate() {
            if keep {
                let (a, b) = (local as u64 / mu, local as u64 % mu);
                stack.push((k + 1, mu * x + a, mu * y + b));
            }
        }
    }
    Ok(false)
}
