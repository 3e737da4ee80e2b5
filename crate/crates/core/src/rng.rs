//! Seed derivation for reproducible, scheduling-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every random draw in the crate.
pub type Rng = ChaCha8Rng;

/// Generator seeded from a 64-bit seed.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream owned by `thread` in elimination round `round`.
///
/// Distinct `(thread, round)` pairs map to distinct, well-mixed seeds.
pub fn derive(master: u64, thread: u64, round: u64) -> u64 {
    splitmix64(master ^ splitmix64((thread << 32) ^ round ^ 0xA5A5_0000_0000_0000))
}
