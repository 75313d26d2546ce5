use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

/// Closed interval `[lo, hi]`, `lo ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Ord> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn contains_point(&self, v: &T) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    pub fn contains(&self, other: &Interval<T>) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl<T: Serialize> Serialize for Interval<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (&self.lo, &self.hi).serialize(s)
    }
}

impl<'de, T: Deserialize<'de> + Ord> Deserialize<'de> for Interval<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (lo, hi) = <(T, T)>::deserialize(d)?;
        if lo > hi {
            return Err(serde::de::Error::custom("interval endpoints out of order"));
        }
        Ok(Interval { lo, hi })
    }
}

impl<T> From<[T; 2]> for Interval<T> {
    fn from([lo, hi]: [T; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl<T> From<Interval<T>> for [T; 2] {
    fn from(i: Interval<T>) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval<Scalar> {
    pub fn length(&self) -> Scalar {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Scalar {
        Scalar::midpoint(&self.lo, &self.hi)
    }
}

impl Interval<i64> {
    pub fn length(&self) -> i64 {
        self.hi - self.lo
    }

    pub fn to_scalar(&self, denom: i64) -> Interval<Scalar> {
        Interval {
            lo: Scalar::ratio(self.lo as i128, denom as i128),
            hi: Scalar::ratio(self.hi as i128, denom as i128),
        }
    }
}

/// Union of closed intervals, stored sorted with strictly separated members;
/// touching intervals are merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct IntervalUnion<T> {
    parts: Vec<Interval<T>>,
}

/// Union of arcs in an [`ArcFrame`](super::ArcFrame) coordinate.
pub type ArcUnion = IntervalUnion<Scalar>;

impl<T> Default for IntervalUnion<T> {
    fn default() -> Self {
        IntervalUnion { parts: Vec::new() }
    }
}

impl<T: Ord + Clone> IntervalUnion<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parts(&self) -> &[Interval<T>] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Index of the first member whose right end is at or beyond `v`.
    fn first_reaching(&self, v: &T) -> usize {
        self.parts.partition_point(|p| p.hi < *v)
    }

    pub fn insert(&mut self, piece: Interval<T>) {
        let i = self.first_reaching(&piece.lo);
        let j = self.parts.partition_point(|p| p.lo <= piece.hi);
        if i >= j {
            self.parts.insert(i, piece);
            return;
        }
        let lo = if self.parts[i].lo < piece.lo { self.parts[i].lo.clone() } else { piece.lo };
        let hi = if self.parts[j - 1].hi > piece.hi { self.parts[j - 1].hi.clone() } else { piece.hi };
        self.parts.splice(i..j, std::iter::once(Interval { lo, hi }));
    }

    /// Closures of the positive-length pieces of `piece ∖ self`.
    pub fn uncovered_part(&self, piece: &Interval<T>) -> Vec<Interval<T>> {
        let mut out = Vec::new();
        let mut cursor = piece.lo.clone();
        for p in &self.parts[self.first_reaching(&piece.lo)..] {
            if p.lo >= piece.hi {
                break;
            }
            if p.lo > cursor {
                out.push(Interval { lo: cursor.clone(), hi: p.lo.clone() });
            }
            if p.hi > piece.lo {
                cursor = p.hi.clone();
            }
            if cursor >= piece.hi {
                return out;
            }
        }
        if cursor < piece.hi {
            out.push(Interval { lo: cursor, hi: piece.hi.clone() });
        }
        out
    }

    /// Whether `piece` lies inside one member.
    pub fn contains_interval(&self, piece: &Interval<T>) -> bool {
        self.parts.get(self.first_reaching(&piece.lo)).is_some_and(|p| p.contains(piece))
    }

    pub fn contains_point(&self, v: &T) -> bool {
        self.parts.get(self.first_reaching(v)).is_some_and(|p| p.contains_point(v))
    }
}

impl<T: Ord + Clone> FromIterator<Interval<T>> for IntervalUnion<T> {
    fn from_iter<I: IntoIterator<Item = Interval<T>>>(iter: I) -> Self {
        let mut u = IntervalUnion::new();
        for p in iter {
            u.insert(p);
        }
        u
    }
}

impl IntervalUnion<Scalar> {
    pub fn total_length(&self) -> Scalar {
        self.parts.iter().fold(Scalar::zero(), |acc, p| acc + p.length())
    }
}

impl IntervalUnion<i64> {
    pub fn total_length(&self) -> i64 {
        self.parts.iter().map(|p| p.length()).sum()
    }
}

/// `u ∪ piece`.
pub fn union_insert<T: Ord + Clone>(u: &IntervalUnion<T>, piece: Interval<T>) -> IntervalUnion<T> {
    let mut out = u.clone();
    out.insert(piece);
    out
}

/// `piece ∖ u` as a canonical union, together with its total length.
pub fn uncovered_part(u: &IntervalUnion<Scalar>, piece: &Interval<Scalar>) -> (IntervalUnion<Scalar>, Scalar) {
    let parts = IntervalUnion { parts: u.uncovered_part(piece) };
    let len = parts.total_length();
    (parts, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: i64, hi: i64) -> Interval<i64> {
        Interval::new(lo, hi)
    }

    fn q(n: i128, d: i128) -> Scalar {
        Scalar::ratio(n, d)
    }

    #[test]
    fn insert_examples() {
        let u = union_insert(&IntervalUnion::new(), iv(0, 1));
        assert_eq!(u.parts(), &[iv(0, 1)]);
        let u = union_insert(&u, iv(1, 2));
        assert_eq!(u.parts(), &[iv(0, 2)]);
        let u: IntervalUnion<Scalar> = [Interval::new(q(0, 1), q(1, 1)), Interval::new(q(3, 1), q(4, 1))]
            .into_iter()
            .collect();
        let u = union_insert(&u, Interval::new(q(1, 2), q(7, 2)));
        assert_eq!(u.parts(), &[Interval::new(q(0, 1), q(4, 1))]);
    }

    #[test]
    fn uncovered_examples() {
        let unit = Interval::new(q(0, 1), q(1, 1));
        let u: ArcUnion = [unit.clone()].into_iter().collect();
        let (d, len) = uncovered_part(&u, &unit);
        assert!(d.is_empty() && len.is_zero());

        let u: ArcUnion = [Interval::new(q(1, 4), q(1, 2))].into_iter().collect();
        let (d, len) = uncovered_part(&u, &unit);
        assert_eq!(d.parts(), &[Interval::new(q(0, 1), q(1, 4)), Interval::new(q(1, 2), q(1, 1))]);
        assert_eq!(len, q(3, 4));

        let u: ArcUnion = [Interval::new(q(0, 1), q(1, 2)), Interval::new(q(1, 2), q(1, 1))]
            .into_iter()
            .collect();
        assert!(uncovered_part(&u, &unit).0.is_empty());
    }

    #[test]
    fn membership() {
        let u: IntervalUnion<i64> = [iv(0, 2), iv(5, 9)].into_iter().collect();
        assert!(u.contains_interval(&iv(5, 9)));
        assert!(!u.contains_interval(&iv(1, 6)));
        assert!(u.contains_point(&2) && !u.contains_point(&3));
        assert_eq!(u.total_length(), 6);
    }

    fn arb_intervals() -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((-50i64..50, 0i64..20).prop_map(|(a, w)| (a, a + w)), 0..12)
    }

    /// Membership of the half-integer sample `2k+1` (scaled by 2) in a set of intervals.
    fn covered(parts: &[(i64, i64)], x2: i64) -> bool {
        parts.iter().any(|&(a, b)| 2 * a <= x2 && x2 <= 2 * b)
    }

    proptest! {
        #[test]
        fn union_is_canonical_and_exact(ps in arb_intervals()) {
            let u: IntervalUnion<i64> = ps.iter().map(|&(a, b)| iv(a, b)).collect();
            for w in u.parts().windows(2) {
                prop_assert!(w[0].hi < w[1].lo);
            }
            for x2 in -100..=180 {
                let mine = u.parts().iter().any(|p| 2 * p.lo <= x2 && x2 <= 2 * p.hi);
                prop_assert_eq!(mine, covered(&ps, x2));
            }
            let again = ps.iter().fold(u.clone(), |acc, &(a, b)| union_insert(&acc, iv(a, b)));
            prop_assert_eq!(again, u);
        }

        #[test]
        fn difference_lengths_add(ps in arb_intervals(), a in -60i64..60, w in 0i64..40) {
            let u: IntervalUnion<i64> = ps.iter().map(|&(a, b)| iv(a, b)).collect();
            let piece = iv(a, a + w);
            let diff = u.uncovered_part(&piece);
            let outside: i64 = diff.iter().map(|p| p.length()).sum();
            let mut inter = 0;
            for p in u.parts() {
                let lo = p.lo.max(piece.lo);
                let hi = p.hi.min(piece.hi);
                if lo < hi {
                    inter += hi - lo;
                }
            }
            prop_assert_eq!(outside + inter, piece.length());
            for d in &diff {
                prop_assert!(piece.contains(d) && d.lo < d.hi);
                // interior points of the difference are uncovered
                prop_assert!(!u.parts().iter().any(|p| 2 * p.lo <= d.lo + d.hi && d.lo + d.hi <= 2 * p.hi));
            }
            prop_assert_eq!(diff.is_empty(), outside == 0);
        }
    }
}
