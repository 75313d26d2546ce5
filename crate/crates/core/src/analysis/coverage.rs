use std::collections::BTreeSet;

use super::carve::{carve, carved_projection, covers, hull_shadow, CarveMode, SlopeSign};
use crate::error::{bail, Result};
use crate::exactgeom::{lattice_arc, lattice_shadow, shadow_arc, Direction, Interval, Point, Side, Viewpoint};
use crate::grid::{grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;
use crate::visibility::SightSpec;

/// Whether the level-`m` shadows along `d` cover the shadow of the unit
/// square with two `ε`-corners carved.
pub fn projection_coverage(tree: &PercolationTree, m: u32, d: &Direction, eps: &Scalar) -> Result<bool> {
    let region = carve(DyadicSquare::ROOT, eps.clone(), CarveMode::Line(SlopeSign::of(d)))?;
    let target = carved_projection(&region, &SightSpec::Line { d: *d, side: Side::Plus }, tree.m())?;
    let s = grid_side(tree.m(), m)?;
    if s > 1 << 40 {
        bail!(Range, "coverage depth {m} is too deep");
    }
    let scale = Scalar::from(s as i128);
    let (Some(lo), Some(hi)) = ((&target.lo * &scale).floor_i128(), (&target.hi * &scale).ceil_i128()) else {
        bail!(Range, "carved shadow does not fit the lattice");
    };
    let shadows = tree.level(m)?.iter().map(|&(x, y)| lattice_shadow(x as i64, y as i64, d)).collect();
    Ok(covers(shadows, &Interval { lo: lo as i64, hi: hi as i64 }))
}

/// Whether the level-`m` arcs seen from `x` cover the arc of the unit square
/// with all four `ε`-corners carved.
pub fn radial_coverage(tree: &PercolationTree, m: u32, x: &Viewpoint, eps: &Scalar) -> Result<bool> {
    let region = carve(DyadicSquare::ROOT, eps.clone(), CarveMode::Point)?;
    let target = carved_projection(&region, &SightSpec::Point { x: x.clone() }, tree.m())?;
    let s = grid_side(tree.m(), m)?;
    let lat = x.lattice().filter(|_| s < 1 << 31);
    let axis = x.frame().axis;
    let mut arcs = Vec::new();
    for &(ix, iy) in tree.level(m)? {
        arcs.push(match lat {
            Some(l) => lattice_arc(axis, l, ix as i64, iy as i64, s as i64),
            None => shadow_arc(&DyadicSquare { level: m, ix: ix as u64, iy: iy as u64 }, x, tree.m())?,
        });
    }
    Ok(covers(arcs, &target))
}

/// Number of retained level-`k` squares the line through `p0` and `p1` passes,
/// meaning it meets both closed vertical sides or both closed horizontal sides.
pub fn count_passed(tree: &PercolationTree, k: u32, p0: &Point, p1: &Point) -> Result<u64> {
    if p0 == p1 {
        bail!(Domain, "a line needs two distinct points");
    }
    let s = grid_side(tree.m(), k)?;
    if s > 1 << 24 {
        bail!(Range, "level {k} is too deep for a line scan");
    }
    let mut cells: BTreeSet<(u64, u64)> = BTreeSet::new();
    // columns with both vertical sides crossed, then rows with both horizontal ones
    for (u0, v0, u1, v1, swap) in [
        (&p0.0, &p0.1, &p1.0, &p1.1, false),
        (&p0.1, &p0.0, &p1.1, &p1.0, true),
    ] {
        let du = u1 - u0;
        if du.is_zero() {
            continue;
        }
        let slope = (v1 - v0) / du;
        let sc = Scalar::from(s as i128);
        // v in grid units at u = i/S
        let at = |i: i128| (v0 + &slope * (Scalar::ratio(i, s as i128) - u0)) * &sc;
        let last = s as i128 - 1;
        let mut prev = at(0);
        for i in 0..s as i128 {
            let next = at(i + 1);
            let (lo, hi) = if prev <= next { (&prev, &next) } else { (&next, &prev) };
            let first = hi.ceil_i128().map_or(i128::MAX, |c| c - 1).max(0);
            let stop = lo.floor_i128().map_or(i128::MIN, |f| f).min(last);
            for r in first..=stop {
                cells.insert(if swap { (r as u64, i as u64) } else { (i as u64, r as u64) });
            }
            prev = next;
        }
    }
    let level = tree.level(k)?;
    Ok(cells.into_iter().filter(|&(x, y)| level.binary_search(&(x as u32, y as u32)).is_ok()).count() as u64)
}

/// Number of retained level-`k` squares whose concentric copy scaled by `λ`
/// has a shadow containing `z` (a `⟨·, d⊥⟩` value or an arc coordinate).
pub fn count_shadow_hits(tree: &PercolationTree, k: u32, z: &Scalar, sight: &SightSpec, lambda: &Scalar) -> Result<u64> {
    if lambda.signum() <= 0 || *lambda > Scalar::one() {
        bail!(Domain, "scale {lambda} is outside (0, 1]");
    }
    let s = grid_side(tree.m(), k)? as i128;
    let half = lambda / Scalar::from(2 * s);
    let mut hits = 0;
    for &(ix, iy) in tree.level(k)? {
        let cx = Scalar::ratio(2 * ix as i128 + 1, 2 * s);
        let cy = Scalar::ratio(2 * iy as i128 + 1, 2 * s);
        let corners = [(-1, -1), (1, -1), (-1, 1), (1, 1)]
            .map(|(u, v)| (&cx + &half * Scalar::from(u as i128), &cy + &half * Scalar::from(v as i128)));
        if hull_shadow(&corners, sight)?.contains_point(z) {
            hits += 1;
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate, PercParams};

    fn q(n: i128, d: i128) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn full(n: u32) -> PercolationTree {
        generate(&PercParams::new(Scalar::one(), 2, n, 0).unwrap()).unwrap()
    }

    fn extinct(n: u32) -> PercolationTree {
        let mut levels = vec![vec![(0, 0)]];
        levels.extend((0..n).map(|_| vec![]));
        PercolationTree::from_levels(PercParams::new(q(1, 2), 2, n, 0).unwrap(), levels).unwrap()
    }

    fn vp(a: i128, b: i128, c: i128, d: i128) -> Viewpoint {
        Viewpoint::new(q(a, b), q(c, d)).unwrap()
    }

    #[test]
    fn coverage_trivial_cases() {
        let dirs = [Direction::new(1, 1).unwrap(), Direction::new(2, -3).unwrap(), Direction::new(0, 1).unwrap()];
        for m in 0..=5 {
            for e in [q(1, 8), q(1, 3), q(49, 100)] {
                for d in &dirs {
                    assert!(projection_coverage(&full(5), m, d, &e).unwrap());
                    assert!(!projection_coverage(&extinct(5), m.max(1), d, &e).unwrap());
                }
                assert!(radial_coverage(&full(5), m, &vp(-1, 2, 1, 3), &e).unwrap());
                assert!(!radial_coverage(&extinct(5), m.max(1), &vp(3, 1, 1, 2), &e).unwrap());
            }
        }
        assert!(projection_coverage(&full(2), 1, &dirs[0], &q(1, 2)).is_err());
    }

    #[test]
    fn coverage_is_monotone_in_depth() {
        let d = Direction::new(1, 2).unwrap();
        let x = vp(-1, 4, 3, 2);
        for seed in 0..40 {
            let t = generate(&PercParams::new(q(3, 4), 2, 7, seed).unwrap()).unwrap();
            let lines: Vec<bool> = (0..=7).map(|m| projection_coverage(&t, m, &d, &q(1, 8)).unwrap()).collect();
            let points: Vec<bool> = (0..=7).map(|m| radial_coverage(&t, m, &x, &q(1, 8)).unwrap()).collect();
            for w in lines.windows(2).chain(points.windows(2)) {
                assert!(w[0] || !w[1]);
            }
        }
    }

    #[test]
    fn passed_counts_on_full_tree() {
        for n in 1..=7 {
            let t = full(n);
            let side = 1u64 << n;
            let y = (q(3, 10), q(3, 10));
            assert_eq!(count_passed(&t, n, &(q(0, 1), y.0.clone()), &(q(1, 1), y.1)).unwrap(), side);
            // a horizontal grid line passes both adjacent rows
            let g = q(1, 2);
            assert_eq!(count_passed(&t, n, &(q(0, 1), g.clone()), &(q(1, 1), g)).unwrap(), 2 * side);
            // vertical line through the interior of one column
            assert_eq!(count_passed(&t, n, &(q(1, 3), q(0, 1)), &(q(1, 3), q(1, 1))).unwrap(), side);
            // a gently rising line crossing one row boundary
            let p0 = (q(0, 1), q(1, 2) - q(1, 3 * side as i128));
            let p1 = (q(1, 1), q(1, 2) + q(1, 3 * side as i128));
            let v = count_passed(&t, n, &p0, &p1).unwrap();
            assert!(v + 1 >= side && v <= side + 1, "n={n}: {v}");
        }
        assert_eq!(count_passed(&extinct(4), 4, &(q(0, 1), q(1, 3)), &(q(1, 1), q(1, 3))).unwrap(), 0);
        let p = (q(1, 2), q(1, 2));
        assert!(matches!(count_passed(&full(2), 2, &p, &p), Err(crate::Error::Domain(_))));
    }

    /// Passed squares by testing both pairs of sides of every cell directly.
    fn passed_brute(t: &PercolationTree, k: u32, p0: &Point, p1: &Point) -> u64 {
        let s = 1i128 << k;
        // line as α·x + β·y = γ
        let alpha = &p1.1 - &p0.1;
        let beta = &p0.0 - &p1.0;
        let gamma = &alpha * &p0.0 + &beta * &p0.1;
        let meets = |a: (Scalar, Scalar), b: (Scalar, Scalar)| {
            let fa = &alpha * &a.0 + &beta * &a.1 - &gamma;
            let fb = &alpha * &b.0 + &beta * &b.1 - &gamma;
            fa.signum() * fb.signum() <= 0
        };
        let mut count = 0;
        for &(ix, iy) in t.level(k).unwrap() {
            let (x0, x1) = (q(ix as i128, s), q(ix as i128 + 1, s));
            let (y0, y1) = (q(iy as i128, s), q(iy as i128 + 1, s));
            let left = meets((x0.clone(), y0.clone()), (x0.clone(), y1.clone()));
            let right = meets((x1.clone(), y0.clone()), (x1.clone(), y1.clone()));
            let bottom = meets((x0.clone(), y0.clone()), (x1.clone(), y0.clone()));
            let top = meets((x0, y1.clone()), (x1, y1));
            if (left && right) || (bottom && top) {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn passed_matches_side_tests() {
        let lines = [
            ((q(0, 1), q(1, 3)), (q(1, 1), q(2, 5))),
            ((q(-1, 2), q(0, 1)), (q(3, 2), q(1, 1))),
            ((q(1, 4), q(0, 1)), (q(1, 4), q(1, 1))),
            ((q(0, 1), q(0, 1)), (q(1, 1), q(1, 1))),
            ((q(0, 1), q(1, 1)), (q(1, 1), q(0, 1))),
            ((q(1, 7), q(-3, 1)), (q(2, 9), q(5, 1))),
            ((q(0, 1), q(1, 4)), (q(1, 1), q(1, 4))),
        ];
        for seed in 0..10 {
            let t = generate(&PercParams::new(q(4, 5), 2, 5, seed).unwrap()).unwrap();
            for (p0, p1) in &lines {
                for k in 0..=5 {
                    assert_eq!(count_passed(&t, k, p0, p1).unwrap(), passed_brute(&t, k, p0, p1));
                }
            }
        }
    }

    #[test]
    fn shadow_hits_match_brute_force() {
        let d = SightSpec::line(1, 1, Side::Plus).unwrap();
        // level-k cell (ix, iy) has shadow [iy − ix − 1, iy − ix + 1]/2^k, so 0
        // is hit when |ix − iy| ≤ 1
        for k in 0..=5u32 {
            let s = 1i64 << k;
            let mut brute = 0;
            for ix in 0..s {
                for iy in 0..s {
                    let lo = q((iy - ix - 1) as i128, s as i128);
                    let hi = q((iy - ix + 1) as i128, s as i128);
                    if lo.signum() <= 0 && hi.signum() >= 0 {
                        brute += 1;
                    }
                }
            }
            assert_eq!(count_shadow_hits(&full(5), k, &Scalar::zero(), &d, &Scalar::one()).unwrap(), brute);
            assert_eq!(brute, 3 * s as u64 - 2);
        }
        assert_eq!(count_shadow_hits(&extinct(3), 3, &Scalar::zero(), &d, &q(1, 2)).unwrap(), 0);
        assert!(count_shadow_hits(&full(2), 2, &Scalar::zero(), &d, &q(0, 1)).is_err());
        assert!(count_shadow_hits(&full(2), 2, &Scalar::zero(), &d, &q(3, 2)).is_err());
    }

    #[test]
    fn shadow_hits_shrink_with_scale() {
        let sights = [SightSpec::line(2, -1, Side::Plus).unwrap(), SightSpec::point(q(-1, 3), q(2, 3)).unwrap()];
        for seed in 0..10 {
            let t = generate(&PercParams::new(q(3, 5), 2, 5, seed).unwrap()).unwrap();
            for sight in &sights {
                for z in [q(0, 1), q(1, 3), q(-1, 5), q(1, 7)] {
                    let counts: Vec<u64> = [q(1, 1), q(3, 4), q(1, 2), q(1, 8)]
                        .iter()
                        .map(|l| count_shadow_hits(&t, 5, &z, sight, l).unwrap())
                        .collect();
                    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
                }
            }
        }
    }
}
