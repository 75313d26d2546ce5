use super::direction::{Axis, Direction, Viewpoint};
use super::union::Interval;
use crate::error::{bail, Result};
use crate::grid::{grid_side, DyadicSquare};
use crate::scalar::Scalar;

/// Shadow of the level cell `(ix, iy)` on `d⊥`, in units of `M^{-level}`.
pub fn lattice_shadow(ix: i64, iy: i64, d: &Direction) -> Interval<i64> {
    let (px, py) = d.perp();
    let base = px * ix + py * iy;
    Interval { lo: base + px.min(0) + py.min(0), hi: base + px.max(0) + py.max(0) }
}

/// `⟨2·centre, d⟩` in units of `M^{-level}`; ascending along `d`.
pub fn lattice_depth(ix: i64, iy: i64, d: &Direction) -> i64 {
    d.a() * (2 * ix + 1) + d.b() * (2 * iy + 1)
}

/// Exact projection `[min, max]` of the closed square onto `d⊥ = (−b, a)`.
pub fn project_square(sq: &DyadicSquare, d: &Direction, m: u32) -> Result<Interval<Scalar>> {
    let side = grid_side(m, sq.level)?;
    if side > i64::MAX as u64 / 4 {
        bail!(Range, "level {} is too deep for lattice projection", sq.level);
    }
    Ok(lattice_shadow(sq.ix as i64, sq.iy as i64, d).to_scalar(side as i64))
}

/// Arc-frame coordinates of the lattice corner `(X/S, Y/S)` seen from `x = (P1/D, P2/D)`.
pub(crate) fn lattice_corner_coord(axis: Axis, lat: (i128, i128, i128), x: i64, y: i64, s: i64) -> Scalar {
    let (p1, p2, d) = lat;
    let w1 = x as i128 * d - p1 * s as i128;
    let w2 = y as i128 * d - p2 * s as i128;
    match axis {
        Axis::PosX | Axis::NegX => Scalar::ratio(w2, w1),
        Axis::PosY | Axis::NegY => Scalar::ratio(-w1, w2),
    }
}

/// Shadow arc of `sq` seen from `x` in the viewpoint's [`ArcFrame`](super::ArcFrame):
/// the smallest interval of coordinates containing every direction from `x` to
/// a point of `sq`. Its endpoints are coordinates of corners.
pub fn shadow_arc(sq: &DyadicSquare, x: &Viewpoint, m: u32) -> Result<Interval<Scalar>> {
    let frame = x.frame();
    let mut lo: Option<Scalar> = None;
    let mut hi: Option<Scalar> = None;
    for (cx, cy) in sq.corners(m) {
        let w = (cx - x.x1(), cy - x.x2());
        let Some(t) = frame.coord(&w) else {
            bail!(Domain, "viewpoint {x} is not separated from {sq}");
        };
        if lo.as_ref().is_none_or(|l| t < *l) {
            lo = Some(t.clone());
        }
        if hi.as_ref().is_none_or(|h| t > *h) {
            hi = Some(t);
        }
    }
    Ok(Interval::new(lo.unwrap(), hi.unwrap()))
}

/// Lattice version of [`shadow_arc`] for a level with grid side `s`.
pub(crate) fn lattice_arc(axis: Axis, lat: (i128, i128, i128), ix: i64, iy: i64, s: i64) -> Interval<Scalar> {
    let mut ts = [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(a, b)| lattice_corner_coord(axis, lat, ix + a, iy + b, s));
    ts.sort();
    let [lo, _, _, hi] = ts;
    Interval { lo, hi }
}
