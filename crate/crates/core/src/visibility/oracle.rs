//! Independent under-approximation of a visible cover by casting evenly spaced
//! rays and walking the grid cell by cell until the first retained cell.
//!
//! Ray `i` of `R` sits at coordinate `lo + (2i+1)·W/(2R)` across the shadow (or
//! arc) of the unit square, so the grid for `3R` contains the grid for `R`.
//! Rays through a lattice point can enter two cells at once; they are skipped
//! rather than guessed, which keeps the result a subset of the true cover.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::{SightSpec, VisibleCover};
use crate::error::{bail, Result};
use crate::exactgeom::{lattice_shadow, shadow_arc, Interval};
use crate::grid::{grid_side, DyadicSquare, PercolationTree};
use crate::scalar::Scalar;

/// Oracle walks use a bitmap of the level; keep it below 2^28 cells.
const MAX_ORACLE_SIDE: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Distinct first-hit squares, sorted.
    pub squares: Vec<DyadicSquare>,
    pub rays: u64,
    /// Rays passing through a lattice point (or too large for the walker), not counted.
    pub skipped: u64,
    /// Rays that hit nothing.
    pub misses: u64,
}

struct Bitmap {
    s: u64,
    bits: Vec<u64>,
}

impl Bitmap {
    fn new(s: u64, cells: &[(u32, u32)]) -> Self {
        let mut bits = vec![0u64; (s * s).div_ceil(64) as usize];
        for &(x, y) in cells {
            let i = x as u64 * s + y as u64;
            bits[(i / 64) as usize] |= 1 << (i % 64);
        }
        Bitmap { s, bits }
    }

    fn get(&self, x: i128, y: i128) -> bool {
        let i = x as u64 * self.s + y as u64;
        self.bits[(i / 64) as usize] >> (i % 64) & 1 == 1
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Walk {
    Hit(u64, u64),
    Miss,
    Skip,
}

/// Walks the line `αX + βY = γ` (grid units) through `[0,S]²` in the travel
/// direction `(tx, ty)` and returns the first set cell.
fn walk(map: &Bitmap, alpha: i128, beta: i128, gamma: i128, tx: i128, ty: i128) -> Walk {
    walk_checked(map, alpha, beta, gamma, tx, ty).unwrap_or(Walk::Skip)
}

fn walk_checked(map: &Bitmap, alpha: i128, beta: i128, gamma: i128, tx: i128, ty: i128) -> Option<Walk> {
    let s = map.s as i128;
    if beta == 0 {
        // vertical line X = γ/α
        let (q, r) = gamma.div_mod_floor(&alpha);
        if r == 0 {
            return Some(if (0..=s).contains(&q) { Walk::Skip } else { Walk::Miss });
        }
        if !(0..s).contains(&q) {
            return Some(Walk::Miss);
        }
        let rows: Box<dyn Iterator<Item = i128>> = if ty > 0 { Box::new(0..s) } else { Box::new((0..s).rev()) };
        for y in rows {
            if map.get(q, y) {
                return Some(Walk::Hit(q as u64, y as u64));
            }
        }
        return Some(Walk::Miss);
    }
    // Y(X) = (γ − αX)/β with β > 0; restrict to columns where 0 ≤ Y ≤ S
    let (alpha, beta, gamma) = if beta < 0 { (alpha.checked_neg()?, -beta, gamma.checked_neg()?) } else { (alpha, beta, gamma) };
    let (mut c0, mut c1) = (0i128, s - 1);
    if alpha != 0 {
        let xa = Integer::div_floor(&gamma, &alpha);
        let xb = Integer::div_floor(&gamma.checked_sub(beta.checked_mul(s)?)?, &alpha);
        c0 = c0.max(xa.min(xb));
        c1 = c1.min(xa.max(xb));
    }
    if c0 > c1 {
        return Some(Walk::Miss);
    }
    // (⌊num/β⌋, num mod β) for num = γ − αX, advanced one column at a time
    let step = |(q, r): (i128, i128), (sq, sr): (i128, i128)| {
        let (q, r) = (q + sq, r + sr);
        if r >= beta {
            (q + 1, r - beta)
        } else {
            (q, r)
        }
    };
    let up = alpha.checked_neg()?.div_mod_floor(&beta);
    let down = alpha.div_mod_floor(&beta);
    let start = if tx > 0 { c0 } else { c1 };
    let mut at = gamma.checked_sub(alpha.checked_mul(start)?)?.div_mod_floor(&beta);
    let mut next = step(at, up);
    let mut x = start;
    while (c0..=c1).contains(&x) {
        let ((y0, r0), (y1, r1)) = (at, next);
        if (r0 == 0 && (0..=s).contains(&y0)) || (r1 == 0 && (0..=s).contains(&y1)) {
            return Some(Walk::Skip);
        }
        let (lo, hi) = (y0.min(y1).max(0), y0.max(y1).min(s - 1));
        if lo <= hi {
            if ty >= 0 {
                for y in lo..=hi {
                    if map.get(x, y) {
                        return Some(Walk::Hit(x as u64, y as u64));
                    }
                }
            } else {
                for y in (lo..=hi).rev() {
                    if map.get(x, y) {
                        return Some(Walk::Hit(x as u64, y as u64));
                    }
                }
            }
        }
        if tx > 0 {
            (at, next) = (next, step(next, up));
            x += 1;
        } else {
            (at, next) = (step(at, down), at);
            x -= 1;
        }
    }
    Some(Walk::Miss)
}

/// Integer `(num, den)` of a scalar, if it fits.
fn parts(v: &Scalar) -> Option<(i128, i128)> {
    v.as_i128_pair()
}

/// Casts `r` rays and returns the set of first-hit squares.
pub fn ray_cast_oracle(tree: &PercolationTree, n: u32, sight: &SightSpec, r: u64) -> Result<OracleResult> {
    if r == 0 {
        bail!(Param, "ray count must be at least 1");
    }
    let s = grid_side(tree.m(), n)?;
    if s > MAX_ORACLE_SIDE {
        bail!(Range, "grid side {s} is too large for the ray-cast oracle");
    }
    let map = Bitmap::new(s, tree.level(n)?);
    let (si, ri) = (s as i128, r as i128);
    let mut hits = Vec::new();
    let (mut skipped, mut misses) = (0u64, 0u64);
    match sight {
        SightSpec::Line { d, side } => {
            let t = side.travel(d);
            let ext = lattice_shadow(0, 0, d);
            let (lo, w) = (ext.lo as i128, ext.length() as i128);
            // −b·X + a·Y = S·z, scaled by 2R
            let alpha = -2 * ri * d.b() as i128;
            let beta = 2 * ri * d.a() as i128;
            for i in 0..ri {
                let gamma = si * (2 * ri * lo + (2 * i + 1) * w);
                match walk(&map, alpha, beta, gamma, t.a() as i128, t.b() as i128) {
                    Walk::Hit(x, y) => hits.push((x, y)),
                    Walk::Miss => misses += 1,
                    Walk::Skip => skipped += 1,
                }
            }
        }
        SightSpec::Point { x } => {
            let arc = shadow_arc(&DyadicSquare::ROOT, x, tree.m())?;
            let frame = x.frame();
            let width = arc.length();
            let fast = RayFan::new(&arc.lo, &width, ri, x, frame.axis.normal(), si);
            let two_r = Scalar::from(2 * ri);
            for i in 0..ri {
                let line = fast.as_ref().and_then(|f| f.line(i)).or_else(|| {
                    let t = &arc.lo + &width * Scalar::from(2 * i + 1) / &two_r;
                    let v = frame.direction(&t);
                    // −v2·X + v1·Y = S·(v1·x2 − v2·x1)
                    let rhs = (&v.0 * x.x2() - &v.1 * x.x1()) * Scalar::from(si);
                    point_line(&v, &rhs)
                });
                let res = match line {
                    Some((alpha, beta, gamma, tx, ty)) => walk(&map, alpha, beta, gamma, tx, ty),
                    None => Walk::Skip,
                };
                match res {
                    Walk::Hit(a, b) => hits.push((a, b)),
                    Walk::Miss => misses += 1,
                    Walk::Skip => skipped += 1,
                }
            }
        }
    }
    hits.sort_unstable();
    hits.dedup();
    let squares = hits.into_iter().map(|(ix, iy)| DyadicSquare { level: n, ix, iy }).collect();
    Ok(OracleResult { squares, rays: r, skipped, misses })
}

/// Integer form of the point rays: ray `i` has direction `C·n + T_i·rot90(n)`
/// with `T_i = A + B·(2i+1)`, through `x = (P1, P2)/D`.
struct RayFan {
    a: i128,
    b: i128,
    c: i128,
    n: (i128, i128),
    p: (i128, i128, i128),
    s: i128,
}

impl RayFan {
    fn new(lo: &Scalar, width: &Scalar, r: i128, x: &crate::exactgeom::Viewpoint, n: (i64, i64), s: i128) -> Option<Self> {
        let (ln, ld) = parts(lo)?;
        let (wn, wd) = parts(width)?;
        let wd = wd.checked_mul(2 * r)?;
        let c = ld.lcm(&wd);
        let a = ln.checked_mul(c / ld)?;
        let b = wn.checked_mul(c / wd)?;
        Some(RayFan { a, b, c, n: (n.0 as i128, n.1 as i128), p: x.lattice()?, s })
    }

    fn line(&self, i: i128) -> Option<(i128, i128, i128, i128, i128)> {
        let t = self.b.checked_mul(2 * i + 1)?.checked_add(self.a)?;
        let (nx, ny) = self.n;
        let v1 = self.c.checked_mul(nx)?.checked_sub(t.checked_mul(ny)?)?;
        let v2 = self.c.checked_mul(ny)?.checked_add(t.checked_mul(nx)?)?;
        let (p1, p2, d) = self.p;
        let alpha = v2.checked_mul(d)?.checked_neg()?;
        let beta = v1.checked_mul(d)?;
        let gamma = v1.checked_mul(p2)?.checked_sub(v2.checked_mul(p1)?)?.checked_mul(self.s)?;
        Some((alpha, beta, gamma, v1.signum(), v2.signum()))
    }
}

/// Clears denominators of `−v2·X + v1·Y = rhs`.
fn point_line(v: &(Scalar, Scalar), rhs: &Scalar) -> Option<(i128, i128, i128, i128, i128)> {
    let (n1, d1) = parts(&v.0)?;
    let (n2, d2) = parts(&v.1)?;
    let (n3, d3) = parts(rhs)?;
    let l = d1.lcm(&d2);
    let l = (l / l.gcd(&d3)).checked_mul(d3)?;
    let alpha = (-n2).checked_mul(l / d2)?;
    let beta = n1.checked_mul(l / d1)?;
    let gamma = n3.checked_mul(l / d3)?;
    Some((alpha, beta, gamma, n1.signum(), n2.signum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// Every uncovered piece is narrower than the ray spacing, so the grid
    /// may legitimately pass it by.
    SubResolutionSliver,
    /// A ray through the window was skipped for touching a lattice point.
    Grazing,
    Unexplained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub square: DyadicSquare,
    pub kind: DiscrepancyKind,
}

/// Classifies each marked square the oracle missed. Squares the oracle found
/// that are not marked are always `Unexplained` (the oracle is meant to be a subset).
pub fn audit_discrepancies(cover: &VisibleCover, oracle: &OracleResult, tree: &PercolationTree) -> Result<Vec<Discrepancy>> {
    let (lo, width) = match &cover.sight {
        SightSpec::Line { d, .. } => {
            let e = lattice_shadow(0, 0, d);
            (Scalar::from(e.lo as i128), Scalar::from(e.length() as i128))
        }
        SightSpec::Point { x } => {
            let a = shadow_arc(&DyadicSquare::ROOT, x, tree.m())?;
            let w = a.length();
            (a.lo, w)
        }
    };
    let spacing = &width / Scalar::from(oracle.rays as i128);
    let mut out = Vec::new();
    for sq in &oracle.squares {
        if !cover.is_marked(sq) {
            out.push(Discrepancy { square: *sq, kind: DiscrepancyKind::Unexplained });
        }
    }
    for (sq, win) in cover.marked.iter().zip(&cover.windows) {
        if oracle.squares.binary_search(sq).is_ok() {
            continue;
        }
        let kind = if win.length() <= spacing {
            DiscrepancyKind::SubResolutionSliver
        } else if ray_skipped_inside(tree, cover, win, &lo, &spacing)? {
            DiscrepancyKind::Grazing
        } else {
            DiscrepancyKind::Unexplained
        };
        out.push(Discrepancy { square: *sq, kind });
    }
    Ok(out)
}

/// Whether some grid ray strictly inside `win` is one the walker would skip.
fn ray_skipped_inside(tree: &PercolationTree, cover: &VisibleCover, win: &Interval<Scalar>, lo: &Scalar, spacing: &Scalar) -> Result<bool> {
    // grid coordinates lo + (i + 1/2)·spacing
    let half = Scalar::ratio(1, 2);
    let first: num_bigint::BigInt = ((&win.lo - lo) / spacing - &half).floor() + 1;
    let last = ((&win.hi - lo) / spacing - &half).ceil() - 1;
    let mut i = first;
    let mut probes = 0;
    while i <= last && probes < 64 {
        let z = lo + (Scalar::from(i.clone()) + &half) * spacing;
        if passes_lattice_point(tree, cover, &z)? {
            return Ok(true);
        }
        i += 1;
        probes += 1;
    }
    Ok(false)
}

fn passes_lattice_point(tree: &PercolationTree, cover: &VisibleCover, z: &Scalar) -> Result<bool> {
    let ray = super::witness::window_ray(&cover.sight, z)?;
    let s = grid_side(tree.m(), cover.level)?;
    let sc = Scalar::from(s as i128);
    for (x, y) in crate::exactgeom::cells_on_line(&ray, s) {
        for (cx, cy) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
            let p = (Scalar::from(cx as i128) / &sc, Scalar::from(cy as i128) / &sc);
            let w = (&p.0 - &ray.origin.0, &p.1 - &ray.origin.1);
            if (&w.0 * &ray.dir.1 - &w.1 * &ray.dir.0).is_zero() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
