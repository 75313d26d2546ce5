use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::exactgeom::{Direction, Interval};
use crate::grid::{ancestor, DyadicSquare};
use crate::scalar::Scalar;
use crate::visibility::SightSpec;

/// Slope of the source line of a parallel view. Viewing along `(a, b)` with
/// `ab > 0` means the source line has negative slope, and the extreme cells of
/// a square along that line are its upper-left and lower-right ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeSign {
    Negative,
    Positive,
}

impl SlopeSign {
    /// Axis-parallel views get `Negative`; both diagonals give the same axis shadow.
    pub fn of(d: &Direction) -> SlopeSign {
        if (d.a() > 0) != (d.b() > 0) && d.a() != 0 && d.b() != 0 {
            SlopeSign::Positive
        } else {
            SlopeSign::Negative
        }
    }
}

/// Whether `sq` is one of the two designated corner cells of the `M² × M²`
/// grid of its level-`(level − 2)` ancestor.
pub fn is_corner(sq: &DyadicSquare, sign: SlopeSign, m: u32) -> Result<bool> {
    if sq.level < 2 {
        bail!(Range, "corner test needs a square of level ≥ 2, got {sq}");
    }
    let top = ancestor(sq, 2, m)?;
    let m2 = (m as u64) * (m as u64);
    let (rx, ry) = (sq.ix - top.ix * m2, sq.iy - top.iy * m2);
    let last = m2 - 1;
    Ok(match sign {
        SlopeSign::Negative => (rx, ry) == (0, last) || (rx, ry) == (last, 0),
        SlopeSign::Positive => (rx, ry) == (0, 0) || (rx, ry) == (last, last),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CarveMode {
    /// Two corners along the source line of the given slope.
    Line(SlopeSign),
    /// All four corners.
    Point,
}

/// A square with half-open corner squares of side `ε·side` removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarvedRegion {
    pub base: DyadicSquare,
    pub eps: Scalar,
    pub mode: CarveMode,
}

pub fn carve(base: DyadicSquare, eps: Scalar, mode: CarveMode) -> Result<CarvedRegion> {
    if eps.signum() <= 0 || eps >= Scalar::ratio(1, 2) {
        bail!(Domain, "carving size {eps} is outside (0, 1/2)");
    }
    Ok(CarvedRegion { base, eps, mode })
}

impl CarvedRegion {
    /// Which corners are removed, as `(right, top)` flags.
    fn carved(&self) -> Vec<(bool, bool)> {
        match self.mode {
            CarveMode::Line(SlopeSign::Negative) => vec![(false, true), (true, false)],
            CarveMode::Line(SlopeSign::Positive) => vec![(false, false), (true, true)],
            CarveMode::Point => vec![(false, false), (true, false), (false, true), (true, true)],
        }
    }

    /// Vertices of the region's convex hull: every kept corner, and for each
    /// carved corner the two points where the notch meets the sides.
    pub fn hull_vertices(&self, m: u32) -> Vec<(Scalar, Scalar)> {
        let [(x0, y0), (x1, y1)] = self.base.bounds(m);
        let cut = &self.eps * &self.base.side(m);
        let carved = self.carved();
        let mut out = Vec::with_capacity(8);
        for right in [false, true] {
            for top in [false, true] {
                let x = if right { &x1 } else { &x0 };
                let y = if top { &y1 } else { &y0 };
                if !carved.contains(&(right, top)) {
                    out.push((x.clone(), y.clone()));
                    continue;
                }
                let inward_x = if right { x - &cut } else { x + &cut };
                let inward_y = if top { y - &cut } else { y + &cut };
                out.push((inward_x, y.clone()));
                out.push((x.clone(), inward_y));
            }
        }
        out
    }
}

/// Exact shadow of the region: an interval of `⟨·, d⊥⟩` for a line sight, or
/// an arc in the viewpoint's frame for a point sight.
pub fn carved_projection(region: &CarvedRegion, sight: &SightSpec, m: u32) -> Result<Interval<Scalar>> {
    hull_shadow(&region.hull_vertices(m), sight)
}

/// `[min, max]` of the shadow coordinate over a finite point set.
pub(crate) fn hull_shadow(points: &[(Scalar, Scalar)], sight: &SightSpec) -> Result<Interval<Scalar>> {
    let coords: Vec<Scalar> = match sight {
        SightSpec::Line { d, .. } => {
            let (px, py) = d.perp();
            let (px, py) = (Scalar::from(px), Scalar::from(py));
            points.iter().map(|(x, y)| x * &px + y * &py).collect()
        }
        SightSpec::Point { x } => {
            let frame = x.frame();
            let mut out = Vec::with_capacity(points.len());
            for (px, py) in points {
                let w = (px - x.x1(), py - x.x2());
                match frame.coord(&w) {
                    Some(t) => out.push(t),
                    None => bail!(Domain, "viewpoint {x} is not separated from ({px}, {py})"),
                }
            }
            out
        }
    };
    let lo = coords.iter().min().cloned();
    let hi = coords.iter().max().cloned();
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(Interval { lo, hi }),
        _ => bail!(Domain, "empty point set has no shadow"),
    }
}

/// Whether the union of closed `pieces` contains `target`.
pub(crate) fn covers<T: Ord + Clone>(mut pieces: Vec<Interval<T>>, target: &Interval<T>) -> bool {
    pieces.sort_unstable_by(|a, b| a.lo.cmp(&b.lo));
    let mut reach: Option<T> = None;
    for p in pieces {
        if p.hi < target.lo {
            continue;
        }
        let frontier = reach.as_ref().unwrap_or(&target.lo);
        if p.lo > *frontier {
            break;
        }
        if reach.as_ref().is_none_or(|r| p.hi > *r) {
            reach = Some(p.hi);
        }
        if reach.as_ref().is_some_and(|r| *r >= target.hi) {
            return true;
        }
    }
    false
}
