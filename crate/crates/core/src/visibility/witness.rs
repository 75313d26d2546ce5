use serde::{Deserialize, Serialize};

use super::{SightSpec, VisibleCover};
use crate::error::{bail, Result};
use crate::exactgeom::{cells_on_line, ray_first_hit, Ray};
use crate::grid::{grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;

/// First retained level-`n` square hit by `ray`, with its entry parameter.
pub fn first_hit_in_tree(tree: &PercolationTree, n: u32, ray: &Ray) -> Result<Option<(DyadicSquare, Scalar)>> {
    let level = tree.level(n)?;
    let s = grid_side(tree.m(), n)?;
    let candidates: Vec<DyadicSquare> = cells_on_line(ray, s)
        .into_iter()
        .filter(|&(x, y)| level.binary_search(&(x as u32, y as u32)).is_ok())
        .map(|(ix, iy)| DyadicSquare { level: n, ix, iy })
        .collect();
    Ok(ray_first_hit(ray, &candidates, tree.m()))
}

/// The ray through the midpoint of `sq`'s recorded window.
pub(crate) fn window_ray(sight: &SightSpec, window_mid: &Scalar) -> Result<Ray> {
    Ok(match sight {
        SightSpec::Line { d, side } => {
            // the point z·d⊥/|d|² has ⟨·, d⊥⟩ = z
            let (px, py) = d.perp();
            let norm = Scalar::from(d.a() as i128 * d.a() as i128 + d.b() as i128 * d.b() as i128);
            let k = window_mid / norm;
            let through = (&k * Scalar::from(px), &k * Scalar::from(py));
            Ray::from_infinity(&side.travel(d), through)
        }
        SightSpec::Point { x } => {
            let v = x.frame().direction(window_mid);
            let origin = x.point();
            let through = (&origin.0 + &v.0, &origin.1 + &v.1);
            Ray::from_point(origin, &through)?
        }
    })
}

/// Builds the witness ray of a marked square and checks that its first hit
/// among all of `C_n` is that square.
pub fn witness_ray(cover: &VisibleCover, sq: &DyadicSquare, tree: &PercolationTree, n: u32) -> Result<Ray> {
    let Some(window) = cover.window_of(sq) else {
        bail!(Param, "{sq} is not marked in this cover");
    };
    let ray = window_ray(&cover.sight, &window.midpoint())?;
    match first_hit_in_tree(tree, n, &ray)? {
        Some((hit, _)) if hit == *sq => Ok(ray),
        Some((hit, _)) => bail!(Certification, "witness ray of {sq} first hits {hit}"),
        None => bail!(Certification, "witness ray of {sq} hits nothing"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertReport {
    pub checked: usize,
    pub failures: Vec<DyadicSquare>,
}

/// Re-verifies a cover against its tree: marked squares are retained, windows
/// have positive length, and every witness ray first hits its square.
/// Witness failures are collected; structural mismatches are errors.
pub fn certify(cover: &VisibleCover, tree: &PercolationTree) -> Result<CertReport> {
    let n = cover.level;
    if cover.marked.len() != cover.windows.len() {
        bail!(Format, "cover has {} squares but {} windows", cover.marked.len(), cover.windows.len());
    }
    let mut failures = Vec::new();
    for (sq, w) in cover.marked.iter().zip(&cover.windows) {
        if sq.level != n || !tree.is_retained(sq) {
            bail!(Certification, "marked square {sq} is not a retained level-{n} square");
        }
        if w.lo >= w.hi {
            failures.push(*sq);
            continue;
        }
        match witness_ray(cover, sq, tree, n) {
            Ok(_) => {}
            Err(crate::Error::Certification(_)) => failures.push(*sq),
            Err(e) => return Err(e),
        }
    }
    Ok(CertReport { checked: cover.marked.len(), failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{Direction, Side, Viewpoint};
    use crate::grid::{generate, PercParams};
    use crate::visibility::{visible_from_line, visible_from_point};

    #[test]
    fn diagonal_level_one_witness() {
        let t = generate(&PercParams::new(Scalar::one(), 2, 1, 0).unwrap()).unwrap();
        let c = visible_from_line(&t, 1, &Direction::new(1, 1).unwrap(), Side::Plus).unwrap();
        let sq = DyadicSquare { level: 1, ix: 0, iy: 1 };
        // (0,0) covers [−1/2, 1/2]; (0,1) adds (1/2, 1]
        assert_eq!(c.window_of(&sq).unwrap().lo, Scalar::ratio(1, 2));
        assert_eq!(c.window_of(&sq).unwrap().hi, Scalar::one());
        witness_ray(&c, &sq, &t, 1).unwrap();
        assert!(certify(&c, &t).unwrap().failures.is_empty());
    }

    #[test]
    fn tampered_window_fails() {
        let t = generate(&PercParams::new(Scalar::one(), 2, 2, 0).unwrap()).unwrap();
        let mut c = visible_from_line(&t, 2, &Direction::new(1, 1).unwrap(), Side::Plus).unwrap();
        // move the window of the corner square onto the shadow of another square
        let i = c.marked.iter().position(|s| (s.ix, s.iy) == (0, 3)).unwrap();
        c.windows[i] = c.windows[0].clone();
        let r = certify(&c, &t).unwrap();
        assert_eq!(r.failures, vec![c.marked[i]]);
        assert!(matches!(witness_ray(&c, &c.marked[i], &t, 2), Err(crate::Error::Certification(_))));
    }

    #[test]
    fn random_covers_certify() {
        for seed in 0..30 {
            let t = generate(&PercParams::new(Scalar::ratio(3, 4), 2, 5, seed).unwrap()).unwrap();
            for (a, b) in [(1, 2), (-3, 1), (0, 1), (5, -4)] {
                for side in [Side::Plus, Side::Minus] {
                    let c = visible_from_line(&t, 5, &Direction::new(a, b).unwrap(), side).unwrap();
                    assert!(certify(&c, &t).unwrap().failures.is_empty());
                }
            }
            let x = Viewpoint::new(Scalar::ratio(-1, 3), Scalar::ratio(7, 5)).unwrap();
            let c = visible_from_point(&t, 5, &x).unwrap();
            assert!(c.audit.is_none());
        }
    }
}
