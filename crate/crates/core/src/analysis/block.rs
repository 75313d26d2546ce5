use std::collections::HashMap;

use super::carve::{carve, carved_projection, CarveMode, SlopeSign};
use crate::error::{bail, Result};
use crate::exactgeom::{lattice_shadow, Direction, Interval};
use crate::grid::{grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;
use crate::visibility::SightSpec;

use super::carve::covers;

/// Whether the shadow of `top` carved by `1/8` on the source-line diagonal is
/// covered by the shadows of its retained level-`m` descendants. Deeper levels
/// can only turn a block into a window.
pub fn is_block(tree: &PercolationTree, top: &DyadicSquare, d: &Direction, m: u32) -> Result<bool> {
    if !tree.is_retained(top) {
        bail!(Domain, "{top} is not a retained square");
    }
    if m < top.level {
        bail!(Range, "block depth {m} is above the square's level {}", top.level);
    }
    let mbase = tree.m();
    let region = carve(*top, Scalar::ratio(1, 8), CarveMode::Line(SlopeSign::of(d)))?;
    let sight = SightSpec::Line { d: *d, side: crate::exactgeom::Side::Plus };
    let target = carved_projection(&region, &sight, mbase)?;
    let s = grid_side(mbase, m)?;
    if s > 1 << 40 {
        bail!(Range, "block depth {m} is too deep");
    }
    let scale = Scalar::from(s as i128);
    let (Some(lo), Some(hi)) = ((&target.lo * &scale).floor_i128(), (&target.hi * &scale).ceil_i128()) else {
        bail!(Range, "carved shadow does not fit the lattice");
    };
    let shadows: Vec<Interval<i64>> = tree
        .descendants(top, m)?
        .into_iter()
        .map(|(x, y)| lattice_shadow(x as i64, y as i64, d))
        .collect();
    Ok(covers(shadows, &Interval { lo: lo as i64, hi: hi as i64 }))
}

/// Memoised [`is_block`] for one tree, direction and depth.
pub struct BlockCache<'a> {
    tree: &'a PercolationTree,
    d: Direction,
    m: u32,
    known: HashMap<(u32, u64, u64), bool>,
}

impl<'a> BlockCache<'a> {
    pub fn new(tree: &'a PercolationTree, d: Direction, m: u32) -> Self {
        BlockCache { tree, d, m, known: HashMap::new() }
    }

    pub fn depth(&self) -> u32 {
        self.m
    }

    pub fn is_block(&mut self, top: &DyadicSquare) -> Result<bool> {
        let key = (top.level, top.ix, top.iy);
        if let Some(&b) = self.known.get(&key) {
            return Ok(b);
        }
        let b = is_block(self.tree, top, &self.d, self.m)?;
        self.known.insert(key, b);
        Ok(b)
    }
}
