use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::scalar::Scalar;

/// Components are kept small enough that lattice keys on a 2^31 grid fit in `i64`.
const MAX_COMPONENT: i64 = 1 << 30;

/// A viewing direction `d = (a, b)` in lowest integer terms. Shadows are
/// measured along `d⊥ = (−b, a)` without normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Direction {
    a: i64,
    b: i64,
}

impl Direction {
    pub fn new(a: i64, b: i64) -> Result<Self> {
        if a == 0 && b == 0 {
            bail!(Domain, "zero direction");
        }
        if a.abs() > MAX_COMPONENT || b.abs() > MAX_COMPONENT {
            bail!(Param, "direction ({a}, {b}) has components beyond 2^30");
        }
        let g = a.gcd(&b);
        Ok(Direction { a: a / g, b: b / g })
    }

    /// Scales a rational vector to the reduced integer direction it spans.
    pub fn from_rationals(a: &Scalar, b: &Scalar) -> Result<Self> {
        let l = a.denom().lcm(&b.denom());
        let ia = (a.to_big_rational() * &l).to_integer();
        let ib = (b.to_big_rational() * &l).to_integer();
        let g = ia.gcd(&ib);
        if g.is_positive() {
            let (ra, rb) = (&ia / &g, &ib / &g);
            if let (Some(x), Some(y)) = (ra.to_i64(), rb.to_i64()) {
                return Direction::new(x, y);
            }
            bail!(Param, "direction ({a}, {b}) is too large");
        }
        bail!(Domain, "zero direction")
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    /// `d⊥ = (−b, a)`.
    pub fn perp(&self) -> (i64, i64) {
        (-self.b, self.a)
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.a == 0 || self.b == 0
    }

    /// `|a| + |b|`: the shadow width of the unit square.
    pub fn l1(&self) -> i64 {
        self.a.abs() + self.b.abs()
    }

    pub fn neg(&self) -> Direction {
        Direction { a: -self.a, b: -self.b }
    }

    /// Mirror image under `x ↦ 1 − x`.
    pub fn reflect_x(&self) -> Direction {
        Direction { a: -self.a, b: self.b }
    }
}

impl TryFrom<(i64, i64)> for Direction {
    type Error = Error;
    fn try_from((a, b): (i64, i64)) -> Result<Self> {
        Direction::new(a, b)
    }
}

impl From<Direction> for (i64, i64) {
    fn from(d: Direction) -> Self {
        (d.a, d.b)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Which orientation of `d` the rays travel along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Side {
    pub fn sign(&self) -> i64 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }

    /// The direction rays actually travel.
    pub fn travel(&self, d: &Direction) -> Direction {
        match self {
            Side::Plus => *d,
            Side::Minus => d.neg(),
        }
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" | "+1" | "1" => Ok(Side::Plus),
            "-" | "minus" | "-1" => Ok(Side::Minus),
            other => Err(Error::Param(format!("side must be + or -, got `{other}`"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Side::Plus { "+" } else { "-" })
    }
}

/// An axis normal `n` of a side of the unit square that separates it from the
/// viewpoint. Every direction from the viewpoint to the square has `⟨n, w⟩ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Axis {
    pub fn normal(&self) -> (i64, i64) {
        match self {
            Axis::PosX => (1, 0),
            Axis::NegX => (-1, 0),
            Axis::PosY => (0, 1),
            Axis::NegY => (0, -1),
        }
    }

    fn is_x(&self) -> bool {
        matches!(self, Axis::PosX | Axis::NegX)
    }
}

/// Angular coordinate for directions leaving a viewpoint: `t = cross(n, w) / ⟨n, w⟩`,
/// strictly increasing with the counter-clockwise angle inside the open half-plane
/// `⟨n, w⟩ > 0`. Arcs are intervals of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArcFrame {
    pub axis: Axis,
}

impl ArcFrame {
    /// Coordinate of the direction `w`; `None` when `w` is outside the half-plane.
    pub fn coord(&self, w: &(Scalar, Scalar)) -> Option<Scalar> {
        let (num, den) = if self.axis.is_x() { (w.1.clone(), w.0.clone()) } else { (-&w.0, w.1.clone()) };
        let (nx, ny) = self.axis.normal();
        let dot = &w.0 * Scalar::from(nx) + &w.1 * Scalar::from(ny);
        (dot.signum() > 0).then(|| num / den)
    }

    /// A direction vector with coordinate `t`: `n + t·rot90(n)`.
    pub fn direction(&self, t: &Scalar) -> (Scalar, Scalar) {
        let (nx, ny) = self.axis.normal();
        let (rx, ry) = (-ny, nx);
        (Scalar::from(nx) + t * Scalar::from(rx), Scalar::from(ny) + t * Scalar::from(ry))
    }
}

/// An external rational viewpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(Scalar, Scalar)", into = "(Scalar, Scalar)")]
pub struct Viewpoint {
    x1: Scalar,
    x2: Scalar,
}

impl Viewpoint {
    pub fn new(x1: Scalar, x2: Scalar) -> Result<Self> {
        let inside = |v: &Scalar| v.signum() >= 0 && *v <= Scalar::one();
        if inside(&x1) && inside(&x2) {
            bail!(Domain, "viewpoint ({x1}, {x2}) lies in the unit square");
        }
        Ok(Viewpoint { x1, x2 })
    }

    pub fn x1(&self) -> &Scalar {
        &self.x1
    }

    pub fn x2(&self) -> &Scalar {
        &self.x2
    }

    pub fn point(&self) -> (Scalar, Scalar) {
        (self.x1.clone(), self.x2.clone())
    }

    pub fn frame(&self) -> ArcFrame {
        let axis = if self.x1.signum() < 0 {
            Axis::PosX
        } else if self.x1 > Scalar::one() {
            Axis::NegX
        } else if self.x2.signum() < 0 {
            Axis::PosY
        } else {
            Axis::NegY
        };
        ArcFrame { axis }
    }

    /// Integer form `(P1, P2, D)` with `x = (P1/D, P2/D)`, when small enough for
    /// lattice arithmetic.
    pub(crate) fn lattice(&self) -> Option<(i128, i128, i128)> {
        let d = self.x1.denom().lcm(&self.x2.denom());
        let p1 = (self.x1.to_big_rational() * &d).to_integer();
        let p2 = (self.x2.to_big_rational() * &d).to_integer();
        let lim = 1i128 << 62;
        let small = |v: Option<i128>| v.filter(|x| x.abs() < lim);
        Some((small(p1.to_i128())?, small(p2.to_i128())?, small(d.to_i128())?))
    }

    /// Mirror image under `x ↦ 1 − x`.
    pub fn reflect_x(&self) -> Viewpoint {
        Viewpoint { x1: Scalar::one() - &self.x1, x2: self.x2.clone() }
    }
}

impl TryFrom<(Scalar, Scalar)> for Viewpoint {
    type Error = Error;
    fn try_from((a, b): (Scalar, Scalar)) -> Result<Self> {
        Viewpoint::new(a, b)
    }
}

impl From<Viewpoint> for (Scalar, Scalar) {
    fn from(v: Viewpoint) -> Self {
        (v.x1, v.x2)
    }
}

impl fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x1, self.x2)
    }
}
