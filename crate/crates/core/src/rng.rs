//! SplitMix64, the single source of randomness in the toolkit.
//!
//! Every random draw (k-means initialisation, mini-batch sampling, time
//! masking) consumes one 64-bit output of this generator, so results are
//! reproducible across platforms and across implementations in other
//! languages.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..m` by multiply-shift reduction,
    /// `floor(x * m / 2^64)`. `m` must be non-zero.
    pub fn below(&mut self, m: u64) -> u64 {
        debug_assert!(m > 0);
        ((self.next_u64() as u128 * m as u128) >> 64) as u64
    }

    /// Uniform float in `[0, 1)` from the top 53 bits of one draw.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Derives an independent child seed for stream `index`.
    ///
    /// Stream splitting hashes `(seed, index)` through one SplitMix64 step so
    /// neighbouring indices yield unrelated streams.
    pub fn stream_seed(seed: u64, index: u64) -> u64 {
        let mut g = SplitMix64::new(seed ^ index.wrapping_mul(GOLDEN_GAMMA).rotate_left(17));
        g.next_u64()
    }
}
