use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::direction::Direction;
use crate::error::{bail, Result};
use crate::grid::DyadicSquare;
use crate::scalar::Scalar;

pub type Point = (Scalar, Scalar);

/// `p(t) = origin + t·dir` for `t ≥ 0`, or for all real `t` when the ray comes
/// from infinity (the line case, where only the travel direction matters).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Point,
    pub dir: Point,
    pub from_infinity: bool,
}

impl Ray {
    /// Ray from `origin` passing through `through`.
    pub fn from_point(origin: Point, through: &Point) -> Result<Self> {
        let dir = (&through.0 - &origin.0, &through.1 - &origin.1);
        if dir.0.is_zero() && dir.1.is_zero() {
            bail!(Domain, "degenerate ray: origin equals the target point");
        }
        Ok(Ray { origin, dir, from_infinity: false })
    }

    /// Ray arriving from infinity along `travel`, passing through `through` at `t = 0`.
    pub fn from_infinity(travel: &Direction, through: Point) -> Self {
        let dir = (Scalar::from(travel.a()), Scalar::from(travel.b()));
        Ray { origin: through, dir, from_infinity: true }
    }

    pub fn at(&self, t: &Scalar) -> Point {
        (&self.origin.0 + t * &self.dir.0, &self.origin.1 + t * &self.dir.1)
    }

    /// Parameter range `[enter, exit]` over which the ray lies in the closed
    /// box, or `None` if it misses. The range is clipped to `t ≥ 0` for rays
    /// that start at a point.
    pub fn box_hit(&self, lo: &Point, hi: &Point) -> Option<(Scalar, Scalar)> {
        let mut enter: Option<Scalar> = (!self.from_infinity).then(Scalar::zero);
        let mut exit: Option<Scalar> = None;
        for (o, v, l, h) in [
            (&self.origin.0, &self.dir.0, &lo.0, &hi.0),
            (&self.origin.1, &self.dir.1, &lo.1, &hi.1),
        ] {
            if v.is_zero() {
                if o < l || o > h {
                    return None;
                }
                continue;
            }
            let t1 = (l - o) / v;
            let t2 = (h - o) / v;
            let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            enter = Some(match enter {
                Some(e) if e >= a => e,
                _ => a,
            });
            exit = Some(match exit {
                Some(x) if x <= b => x,
                _ => b,
            });
        }
        let (enter, exit) = (enter?, exit?);
        (enter <= exit).then_some((enter, exit))
    }
}

/// The square the ray meets first, with its entry parameter. Ties go to the
/// smallest `(level, ix, iy)`.
pub fn ray_first_hit<'a, I>(ray: &Ray, squares: I, m: u32) -> Option<(DyadicSquare, Scalar)>
where
    I: IntoIterator<Item = &'a DyadicSquare>,
{
    let mut best: Option<(DyadicSquare, Scalar)> = None;
    for sq in squares {
        let [lo, hi] = sq.bounds(m);
        let Some((enter, _)) = ray.box_hit(&lo, &hi) else { continue };
        let better = match &best {
            None => true,
            Some((b, t)) => match enter.cmp(t) {
                Ordering::Less => true,
                Ordering::Equal => sq < b,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((*sq, enter));
        }
    }
    best
}

/// Cells of the grid with side `s` whose closed square meets the full line
/// carrying `ray`; a superset of the cells the ray can hit.
pub fn cells_on_line(ray: &Ray, s: u64) -> Vec<(u64, u64)> {
    let (v1, v2) = (&ray.dir.0, &ray.dir.1);
    let steep = v1.abs() < v2.abs();
    // walk the axis along which the line moves fastest
    let (o_major, o_minor, d_major, d_minor) = if steep {
        (&ray.origin.1, &ray.origin.0, v2, v1)
    } else {
        (&ray.origin.0, &ray.origin.1, v1, v2)
    };
    let sc = Scalar::from(s as i128);
    let slope = d_minor / d_major;
    // minor coordinate in grid units at major grid coordinate u
    let base = (o_minor - &slope * o_major) * &sc;
    let minor_at = |u: i128| -> Scalar { &base + &slope * Scalar::from(u) };
    let last_cell = s as i128 - 1;
    // major range over which the minor coordinate stays within [0, s]
    let (mut u0, mut u1) = (0i128, last_cell);
    if !slope.is_zero() {
        let a = (-&base) / &slope;
        let b = (&sc - &base) / &slope;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        u0 = u0.max(lo.floor_i128().unwrap_or(i128::MIN) - 1);
        u1 = u1.min(hi.floor_i128().unwrap_or(i128::MAX));
    }
    let mut out = Vec::new();
    if u0 > u1 {
        return out;
    }
    let mut prev = minor_at(u0);
    for u in u0..=u1 {
        let next = minor_at(u + 1);
        let (lo, hi) = if prev <= next { (&prev, &next) } else { (&next, &prev) };
        let first = lo.ceil_i128().map_or(0, |c| (c - 1).max(0));
        let last = hi.floor_i128().map_or(last_cell, |f| f.min(last_cell));
        for w in first..=last {
            let (u, w) = (u as u64, w as u64);
            out.push(if steep { (w, u) } else { (u, w) });
        }
        prev = next;
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn level1() -> Vec<DyadicSquare> {
        (0..2).flat_map(|x| (0..2).map(move |y| DyadicSquare { level: 1, ix: x, iy: y })).collect()
    }

    #[test]
    fn vertical_ray_ties_on_shared_edge() {
        let ray = Ray::from_point((q(1, 2), q(-3, 1)), &(q(1, 2), q(1, 2))).unwrap();
        let (sq, t) = ray_first_hit(&ray, &level1(), 2).unwrap();
        assert_eq!((sq.ix, sq.iy), (0, 0));
        assert_eq!(ray.at(&t), (q(1, 2), q(0, 1)));
    }

    #[test]
    fn missing_ray() {
        let ray = Ray::from_point((q(-1, 1), q(2, 1)), &(q(3, 1), q(2, 1))).unwrap();
        assert!(ray_first_hit(&ray, &level1(), 2).is_none());
        assert!(Ray::from_point((q(1, 1), q(1, 1)), &(q(1, 1), q(1, 1))).is_err());
    }

    #[test]
    fn diagonal_ray_hits_lower_left() {
        let ray = Ray::from_point((q(-1, 1), q(-1, 1)), &(q(3, 4), q(3, 4))).unwrap();
        let (sq, t) = ray_first_hit(&ray, &level1(), 2).unwrap();
        assert_eq!((sq.ix, sq.iy), (0, 0));
        // enters at the origin corner: -1 + t·(7/4) = 0
        assert_eq!(t, q(4, 7));
    }

    #[test]
    fn rays_from_infinity_ignore_parameter_sign() {
        let d = Direction::new(1, 0).unwrap();
        let ray = Ray::from_infinity(&d, (q(5, 1), q(1, 4)));
        let (sq, _) = ray_first_hit(&ray, &level1(), 2).unwrap();
        assert_eq!((sq.ix, sq.iy), (0, 0));
    }

    #[test]
    fn line_cells_superset_of_hits() {
        let s = 8u64;
        let all: Vec<DyadicSquare> = (0..s)
            .flat_map(|x| (0..s).map(move |y| DyadicSquare { level: 3, ix: x, iy: y }))
            .collect();
        let rays = [
            Ray::from_point((q(-1, 1), q(-1, 3)), &(q(1, 2), q(1, 2))).unwrap(),
            Ray::from_point((q(1, 3), q(-2, 1)), &(q(3, 8), q(1, 1))).unwrap(),
            Ray::from_infinity(&Direction::new(1, 1).unwrap(), (q(0, 1), q(1, 4))),
            Ray::from_infinity(&Direction::new(0, 1).unwrap(), (q(3, 8), q(0, 1))),
        ];
        for ray in rays {
            let cells = cells_on_line(&ray, s);
            let line = Ray { from_infinity: true, ..ray.clone() };
            for sq in &all {
                let [lo, hi] = sq.bounds(2);
                let meets = line.box_hit(&lo, &hi).is_some();
                assert_eq!(meets, cells.binary_search(&(sq.ix, sq.iy)).is_ok(), "{sq}");
            }
        }
    }
}
