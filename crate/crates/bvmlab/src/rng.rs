//! Seed streams. Every replication, worker and draw row gets its own
//! generator derived from a master seed, so results never depend on
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Seed of stream `index` under `master` (master XOR index). The ChaCha
/// seeding expands the 64-bit value, so adjacent seeds give unrelated streams.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    master ^ index
}

/// Child seed for a named purpose (observation noise, calibration draws,
/// fresh draws, ...). Mixed through SplitMix64 so that the XOR streams of
/// different children never overlap in practice.
pub fn derive_seed(parent: u64, purpose: u64) -> u64 {
    let mut z = parent
        .wrapping_add(purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, index: u64) -> Rng {
    rng_from_seed(stream_seed(master, index))
}
