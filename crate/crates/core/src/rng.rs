//! Seeded random substreams.
//!
//! A run is identified by one 64-bit seed. Every independent consumer (a path
//! in an ensemble, the price lane vs. the volatility lane of one path, ...)
//! draws from its own ChaCha8 stream selected by a stream id, so results do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Lanes within one path.
pub mod lane {
    pub const VOLATILITY: u64 = 0;
    pub const PRICE: u64 = 1;
    pub const MIXTURE: u64 = 2;
    pub const AGENTS: u64 = 3;
    pub const BOOK: u64 = 4;
}

const LANES_PER_PATH: u64 = 16;

/// The stream for `(path, lane)` under `seed`.
pub fn substream(seed: u64, path: u64, lane: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(LANES_PER_PATH).wrapping_add(lane));
    rng
}

#[inline]
pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}
