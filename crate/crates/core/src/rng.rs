//! Seeded random streams.
//!
//! Every stochastic choice draws from ChaCha8, a counter-based generator:
//! one 64-bit seed plus a 64-bit stream id selects an independent sequence.
//! Training uses one stream per purpose so that, for example, changing the
//! number of epochs never perturbs the initial weights:
//!
//! | stream | purpose                          |
//! |--------|----------------------------------|
//! | 1      | weight initialization (W1 then W2, row-major) |
//! | 2      | train/holdout split permutation  |
//! | 3      | per-epoch shuffles               |
//! | 4      | dropout masks (sample-major, coordinate-minor) |
//! | 5      | subsampling of entity candidates |
//!
//! Keyed tables (random baseline vectors) use the stream `fnv1a64(key)`.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

pub const STREAM_INIT: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;
pub const STREAM_DROPOUT: u64 = 4;
pub const STREAM_SAMPLE: u64 = 5;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream dedicated to one string key, independent of any other key.
pub fn keyed_stream(seed: u64, key: &str) -> ChaCha8Rng {
    stream(seed, fnv1a64(key.as_bytes()))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// `k` distinct indices from `0..n`, uniformly, returned ascending.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> alloc::vec::Vec<usize> {
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    let k = k.min(n);
    // partial Fisher-Yates: the first k slots end up a uniform sample
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}
