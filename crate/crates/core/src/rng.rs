//! Small deterministic pseudo-random generator for seeded batteries.
//!
//! The verification suites need reproducible random inputs from a `u64`
//! seed in a `no_std` crate; SplitMix64 is more than enough for that and
//! keeps the dependency graph flat.  It is *not* a cryptographic generator.

/// SplitMix64 generator.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Creates a generator from a seed.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..n` (`n > 0`).
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // The batteries draw from tiny ranges; modulo bias is irrelevant here.
        self.next_u64() % n
    }

    /// Uniform value in the inclusive range `lo..=hi`.
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// Uniform nonzero value in `-bound..=bound`.
    pub fn nonzero_in(&mut self, bound: i64) -> i64 {
        loop {
            let v = self.int_in(-bound, bound);
            if v != 0 {
                return v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::SplitMix64;

    #[test]
    fn deterministic_across_instances() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..64 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn ranges_respected() {
        let mut g = SplitMix64::new(42);
        for _ in 0..256 {
            let v = g.int_in(-3, 5);
            assert!((-3..=5).contains(&v));
            assert_ne!(g.nonzero_in(4), 0);
        }
    }
}
