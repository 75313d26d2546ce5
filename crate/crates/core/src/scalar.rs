//! Exact rational scalars.
//!
//! [`Scalar`] is an arbitrary-precision rational in canonical form (reduced,
//! positive denominator). Values whose numerator and denominator fit in `i128`
//! are kept inline and all arithmetic on them is checked; anything that
//! overflows is recomputed on big integers and demoted again when it fits.
//! Dyadic geometry at desk depths never leaves the inline representation.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone)]
enum Repr {
    /// Reduced, `den > 0`, neither component equal to `i128::MIN`.
    Small(i128, i128),
    Big(Box<BigRational>),
}

#[derive(Clone)]
pub struct Scalar(Repr);

fn small(num: i128, den: i128) -> Option<Scalar> {
    if den == 0 || num == i128::MIN || den == i128::MIN {
        return None;
    }
    let g = num.gcd(&den);
    let (mut n, mut d) = (num / g, den / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    Some(Scalar(Repr::Small(n, d)))
}

fn from_big(r: BigRational) -> Scalar {
    match (r.numer().to_i128(), r.denom().to_i128()) {
        (Some(n), Some(d)) if n != i128::MIN && d != i128::MIN => Scalar(Repr::Small(n, d)),
        _ => Scalar(Repr::Big(Box::new(r))),
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Scalar(Repr::Small(1, 1))
    }

    pub fn from_int(v: i128) -> Self {
        small(v, 1).unwrap_or_else(|| from_big(BigRational::from_integer(BigInt::from(v))))
    }

    /// `num / den`. Panics on a zero denominator.
    pub fn ratio(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        small(num, den).unwrap_or_else(|| {
            from_big(BigRational::new(BigInt::from(num), BigInt::from(den)))
        })
    }

    pub fn from_big_rational(r: BigRational) -> Self {
        from_big(r)
    }

    pub fn to_big_rational(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(r) => (**r).clone(),
        }
    }

    /// Numerator and denominator when they fit in `i128`.
    pub fn as_i128_pair(&self) -> Option<(i128, i128)> {
        match self.0 {
            Repr::Small(n, d) => Some((n, d)),
            Repr::Big(_) => None,
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(n, _) => n.signum() as i32,
            Repr::Big(r) => {
                if r.is_positive() {
                    1
                } else if r.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(r) => r.is_integer(),
        }
    }

    pub fn floor(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, d) => BigInt::from(n.div_floor(d)),
            Repr::Big(r) => r.floor().to_integer(),
        }
    }

    /// `floor` when it fits in `i128`.
    pub fn floor_i128(&self) -> Option<i128> {
        match &self.0 {
            Repr::Small(n, d) => Some(n.div_floor(d)),
            Repr::Big(r) => r.floor().to_integer().to_i128(),
        }
    }

    /// `ceil` when it fits in `i128`.
    pub fn ceil_i128(&self) -> Option<i128> {
        match &self.0 {
            Repr::Small(n, d) => Some(n.div_ceil(d)),
            Repr::Big(r) => r.ceil().to_integer().to_i128(),
        }
    }

    pub fn ceil(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, d) => BigInt::from(n.div_ceil(d)),
            Repr::Big(r) => r.ceil().to_integer(),
        }
    }

    /// Nearest double; reporting only, never used to decide anything.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// The exact value of a finite double.
    pub fn from_f64(v: f64) -> Option<Scalar> {
        BigRational::from_float(v).map(from_big)
    }

    pub fn recip(&self) -> Scalar {
        Scalar::one() / self
    }

    pub fn midpoint(a: &Scalar, b: &Scalar) -> Scalar {
        (a + b) * Scalar::ratio(1, 2)
    }

    pub fn min(self, other: Scalar) -> Scalar {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Scalar) -> Scalar {
        if other > self {
            other
        } else {
            self
        }
    }
}

fn add_small(a: i128, b: i128, c: i128, d: i128) -> Option<Scalar> {
    let g = b.gcd(&d);
    let lhs = a.checked_mul(d / g)?;
    let rhs = c.checked_mul(b / g)?;
    let num = lhs.checked_add(rhs)?;
    let den = b.checked_mul(d / g)?;
    small(num, den)
}

fn mul_small(a: i128, b: i128, c: i128, d: i128) -> Option<Scalar> {
    let g1 = a.gcd(&d).max(1);
    let g2 = c.gcd(&b).max(1);
    let num = (a / g1).checked_mul(c / g2)?;
    let den = (b / g2).checked_mul(d / g1)?;
    small(num, den)
}

impl Add<&Scalar> for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &rhs.0) {
            if let Some(r) = add_small(*a, *b, *c, *d) {
                return r;
            }
        }
        from_big(self.to_big_rational() + rhs.to_big_rational())
    }
}

impl Sub<&Scalar> for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Mul<&Scalar> for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &rhs.0) {
            if let Some(r) = mul_small(*a, *b, *c, *d) {
                return r;
            }
        }
        from_big(self.to_big_rational() * rhs.to_big_rational())
    }
}

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division by zero");
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &rhs.0) {
            let (c, d) = if *c < 0 { (-*d, -*c) } else { (*d, *c) };
            if let Some(r) = mul_small(*a, *b, c, d) {
                return r;
            }
        }
        from_big(self.to_big_rational() / rhs.to_big_rational())
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match &self.0 {
            // i128::MIN never occurs, so negation cannot overflow
            Repr::Small(n, d) => Scalar(Repr::Small(-n, *d)),
            Repr::Big(r) => from_big(-(**r).clone()),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scalar {}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &other.0) {
            if b == d {
                return a.cmp(c);
            }
            if let (Some(l), Some(r)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        self.to_big_rational().cmp(&other.to_big_rational())
    }
}

impl Hash for Scalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // canonical form makes the pair unique
        self.numer().hash(state);
        self.denom().hash(state);
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_int(v as i128)
    }
}

impl From<i128> for Scalar {
    fn from(v: i128) -> Self {
        Scalar::from_int(v)
    }
}

impl From<BigInt> for Scalar {
    fn from(v: BigInt) -> Self {
        from_big(BigRational::from_integer(v))
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as an exact rational")]
pub struct ParseScalarError(String);

impl FromStr for Scalar {
    type Err = ParseScalarError;

    /// Accepts `n`, `n/d`, and finite decimals such as `-0.375`, all read exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseScalarError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(from_big(BigRational::new(n, d)));
        }
        if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let neg = int.starts_with('-');
            let int_digits = int.trim_start_matches(['-', '+']);
            let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
            let mut n: BigInt = digits.parse().map_err(|_| err())?;
            if neg {
                n = -n;
            }
            let d = num_traits::pow(BigInt::from(10), frac.len());
            return Ok(from_big(BigRational::new(n, d)));
        }
        let n: BigInt = t.parse().map_err(|_| err())?;
        Ok(Scalar::from(n))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Accepts the canonical string form, or a JSON number read through its
/// shortest decimal representation.
impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScalarVisitor;

        impl serde::de::Visitor<'_> for ScalarVisitor {
            type Value = Scalar;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"n/d\", a decimal string, or a number")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Scalar, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Scalar, E> {
                Ok(Scalar::from(v as i128))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Scalar, E> {
                Ok(Scalar::from(v as i128))
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Scalar, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite number"));
                }
                v.to_string().parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ScalarVisitor)
    }
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar::zero()
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Scalar {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        assert_eq!(Scalar::ratio(2, -4).to_string(), "-1/2");
        assert_eq!(Scalar::ratio(6, 3).to_string(), "2");
        assert_eq!(q("0.375"), Scalar::ratio(3, 8));
        assert_eq!(q("-1.5"), Scalar::ratio(-3, 2));
        assert_eq!(q(" 7/14 "), Scalar::ratio(1, 2));
        assert!("1/0".parse::<Scalar>().is_err());
        assert!("abc".parse::<Scalar>().is_err());
    }

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Scalar::from_int(i128::MAX / 3);
        let sq = &big * &big;
        assert!(sq.as_i128_pair().is_none());
        let back = &sq / &big;
        assert_eq!(back, big);
        assert!(back.as_i128_pair().is_some());
        let tiny = Scalar::ratio(1, i128::MAX / 5);
        let sum = &tiny + &Scalar::ratio(1, i128::MAX / 7);
        assert!(sum > tiny);
        assert_eq!(&sum - &tiny, Scalar::ratio(1, i128::MAX / 7));
    }

    #[test]
    fn floor_ceil() {
        assert_eq!(Scalar::ratio(-7, 2).floor(), BigInt::from(-4));
        assert_eq!(Scalar::ratio(-7, 2).ceil(), BigInt::from(-3));
        assert_eq!(Scalar::ratio(8, 2).floor(), BigInt::from(4));
    }

    #[test]
    fn serde_as_string() {
        let v = Scalar::ratio(-3, 8);
        let j = serde_json::to_string(&v).unwrap();
        assert_eq!(j, "\"-3/8\"");
        let back: Scalar = serde_json::from_str(&j).unwrap();
        assert_eq!(back, v);
    }

    fn arb() -> impl Strategy<Value = Scalar> {
        (any::<i64>(), 1i64..i64::MAX).prop_map(|(n, d)| Scalar::ratio(n as i128, d as i128))
    }

    proptest! {
        #[test]
        fn field_identities(a in arb(), b in arb(), c in arb()) {
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            if !b.is_zero() {
                prop_assert_eq!(&(&a / &b) * &b, a.clone());
            }
        }

        #[test]
        fn order_matches_big(a in arb(), b in arb()) {
            prop_assert_eq!(a.cmp(&b), a.to_big_rational().cmp(&b.to_big_rational()));
        }
    }
}
