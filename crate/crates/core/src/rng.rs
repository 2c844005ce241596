//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 keyed by a 64-bit seed. Independent
//! streams for the same seed are selected through the ChaCha stream id, so
//! parallel chains never share a sequence. Gaussian variates use the
//! `rand_distr` ziggurat for `StandardNormal`, which is a fixed, portable
//! transform of the underlying 64-bit words.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub type ChainRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Fills `out` with i.i.d. N(0, 1) draws.
pub fn fill_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
}
