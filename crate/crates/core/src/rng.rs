//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in this crate takes an explicit `(seed, stream)`
//! pair instead of a shared generator. ChaCha gives 2^64 independent streams
//! per seed, so ensembles can hand stream `path * CHANNELS + channel` to each
//! worker and the result is bit-identical no matter how many threads run.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;

/// Channels reserved per path inside a noise realization.
pub const CHANNELS_PER_PATH: u64 = 4;

pub const CHANNEL_BROWNIAN: u64 = 0;
pub const CHANNEL_SMALL_GAUSS: u64 = 1;
pub const CHANNEL_JUMPS: u64 = 2;
pub const CHANNEL_AUX: u64 = 3;

/// Generator for one (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id of a channel belonging to one path of an ensemble.
pub fn path_stream(path_index: u64, channel: u64) -> u64 {
    debug_assert!(channel < CHANNELS_PER_PATH);
    path_index
        .wrapping_mul(CHANNELS_PER_PATH)
        .wrapping_add(channel)
}

/// Standard normal draw (f64).
#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

/// Exp(1) draw (f64), floored away from exact zero.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let w: f64 = rand_distr::Exp1.sample(rng);
    w.max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = stream_rng(7, 0).sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = stream_rng(7, 0).sample_iter(rand::distributions::Standard).take(8).collect();
        let c: Vec<u64> = stream_rng(7, 1).sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
