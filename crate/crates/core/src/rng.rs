//! Reproducible random streams.
//!
//! Every stochastic routine takes a `u64` seed. Work that is naturally indexed
//! (time steps, MCMC iterations, forecast draws) gets its own ChaCha stream, so
//! results do not depend on evaluation order or on how many threads are used,
//! and a chain resumed from a checkpoint continues bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Mixes a seed with a tag using the splitmix64 finalizer.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `stream` of the family identified by `(seed, tag)`.
pub fn stream(seed: u64, tag: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, tag));
    rng.set_stream(stream);
    rng
}

/// Fills `out` with independent standard normal draws.
pub fn fill_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Tags separating the stream families used across the crate.
pub mod tags {
    pub const SIMULATE: u64 = 1;
    pub const OBSERVE: u64 = 2;
    pub const BACKWARD: u64 = 3;
    pub const FORECAST: u64 = 4;
    pub const MCMC: u64 = 5;
    pub const DENSE: u64 = 6;
    pub const DATA: u64 = 7;
}
