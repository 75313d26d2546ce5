//! Exact visible cover without any depth ordering: cut the shadow axis at every
//! shadow endpoint, and on each elementary piece mark the square whose entry
//! along the ray through the piece's midpoint comes first.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::witness::window_ray;
use super::{cell_arc, SightSpec, VisibleCover};
use crate::error::Result;
use crate::exactgeom::{lattice_shadow, Interval};
use crate::grid::{grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;

pub fn elementary_cover(tree: &PercolationTree, n: u32, sight: &SightSpec) -> Result<VisibleCover> {
    let cells = tree.level(n)?;
    let m = tree.m();
    let s = grid_side(m, n)? as i64;
    let mut shadows: Vec<(Interval<Scalar>, DyadicSquare)> = Vec::with_capacity(cells.len());
    for &(x, y) in cells {
        let sq = DyadicSquare { level: n, ix: x as u64, iy: y as u64 };
        let sh = match sight {
            SightSpec::Line { d, .. } => lattice_shadow(x as i64, y as i64, d).to_scalar(s),
            SightSpec::Point { x: v } => cell_arc(v, v.lattice(), x as u64, y as u64, n, m, s)?,
        };
        shadows.push((sh, sq));
    }
    let mut cuts: Vec<Scalar> = shadows.iter().flat_map(|(i, _)| [i.lo.clone(), i.hi.clone()]).collect();
    cuts.sort();
    cuts.dedup();
    shadows.sort_by(|a, b| a.0.lo.cmp(&b.0.lo));

    let mut best: BTreeMap<DyadicSquare, Interval<Scalar>> = BTreeMap::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    for w in cuts.windows(2) {
        let piece = Interval { lo: w[0].clone(), hi: w[1].clone() };
        while next < shadows.len() && shadows[next].0.lo <= piece.lo {
            active.push(next);
            next += 1;
        }
        active.retain(|&i| shadows[i].0.hi >= piece.hi);
        if active.is_empty() {
            continue;
        }
        let ray = window_ray(sight, &piece.midpoint())?;
        let mut winner: Option<(Scalar, DyadicSquare)> = None;
        for &i in &active {
            let sq = shadows[i].1;
            let [lo, hi] = sq.bounds(m);
            let Some((enter, _)) = ray.box_hit(&lo, &hi) else { continue };
            let better = match &winner {
                None => true,
                Some((t, w)) => match enter.cmp(t) {
                    Ordering::Less => true,
                    Ordering::Equal => sq < *w,
                    Ordering::Greater => false,
                },
            };
            if better {
                winner = Some((enter, sq));
            }
        }
        if let Some((_, sq)) = winner {
            let slot = best.entry(sq).or_insert_with(|| piece.clone());
            if piece.length() > slot.length() {
                *slot = piece;
            }
        }
    }
    Ok(VisibleCover::assemble(tree, sight.clone(), n, best.into_iter().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{Direction, Side, Viewpoint};
    use crate::grid::{generate, PercParams};
    use crate::visibility::{point_sweep, visible_from_line};

    #[test]
    fn agrees_with_line_sweep() {
        for seed in 0..25 {
            let t = generate(&PercParams::new(Scalar::ratio(7, 10), 2, 4, seed).unwrap()).unwrap();
            for (a, b) in [(1, 1), (1, -2), (3, 1), (0, 1), (1, 0)] {
                for side in [Side::Plus, Side::Minus] {
                    let d = Direction::new(a, b).unwrap();
                    let fast = visible_from_line(&t, 4, &d, side).unwrap();
                    let exact = elementary_cover(&t, 4, &SightSpec::Line { d, side }).unwrap();
                    assert_eq!(fast.marked, exact.marked, "seed {seed} d=({a},{b}) {side}");
                }
            }
        }
    }

    #[test]
    fn agrees_with_point_sweep() {
        let views = [(-1, 2, 1, 3), (3, 2, 1, 2), (1, 3, -2, 1), (-1, 4, -1, 4), (101, 100, 9, 10)];
        for seed in 0..25 {
            let t = generate(&PercParams::new(Scalar::ratio(7, 10), 2, 4, seed).unwrap()).unwrap();
            for &(a, b, c, d) in &views {
                let x = Viewpoint::new(Scalar::ratio(a, b), Scalar::ratio(c, d)).unwrap();
                let fast = point_sweep(&t, 4, &x).unwrap();
                let exact = elementary_cover(&t, 4, &SightSpec::Point { x: x.clone() }).unwrap();
                assert_eq!(fast.marked, exact.marked, "seed {seed} x={x}");
            }
        }
    }
}
