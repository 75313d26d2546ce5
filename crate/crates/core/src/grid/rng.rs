//! Counter-based retention decisions.
//!
//! The verdict for a child square is read from a ChaCha8 keystream keyed by the
//! master seed: the stream id is the child's level and the word position is
//! derived from its parent's linear index and its local offset. Siblings are
//! contiguous in the stream, so one seek serves all `M²` children of a parent.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone)]
pub(crate) struct Decider {
    base: ChaCha8Rng,
    m: u64,
    /// Keep a child iff its 64-bit draw is below this; `2^64` keeps everything.
    threshold: u128,
}

impl Decider {
    pub(crate) fn new(seed: u64, m: u32, threshold: u128) -> Self {
        Decider { base: ChaCha8Rng::seed_from_u64(seed), m: m as u64, threshold }
    }

    /// Appends the retention verdicts of the `M²` children of parent `(ix, iy)`
    /// at `level`, in local order `a·M + b` where the child is `(M·ix + a, M·iy + b)`.
    pub(crate) fn children(&mut self, level: u32, ix: u64, iy: u64, out: &mut Vec<bool>) {
        let m2 = self.m * self.m;
        if self.threshold > u64::MAX as u128 {
            out.extend(std::iter::repeat_n(true, m2 as usize));
            return;
        }
        let side = (self.m as u128).pow(level);
        let parent = ix as u128 * side + iy as u128;
        self.base.set_stream(level as u64 + 1);
        self.base.set_word_pos(parent * m2 as u128 * 2);
        for _ in 0..m2 {
            out.push((self.base.next_u64() as u128) < self.threshold);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions_are_pure() {
        let t = 1u128 << 63;
        let mut a = Decider::new(9, 2, t);
        let mut b = Decider::new(9, 2, t);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.children(3, 5, 1, &mut x);
        a.children(0, 0, 0, &mut x);
        b.children(0, 0, 0, &mut y);
        b.children(3, 5, 1, &mut y);
        assert_eq!(&x[..4], &y[4..]);
        assert_eq!(&x[4..], &y[..4]);
    }

    #[test]
    fn full_threshold_keeps_all() {
        let mut d = Decider::new(1, 3, 1u128 << 64);
        let mut v = Vec::new();
        d.children(2, 1, 1, &mut v);
        assert_eq!(v, vec![true; 9]);
    }
}
