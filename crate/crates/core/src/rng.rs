//! Seeded random streams.
//!
//! All sampling uses ChaCha8 (a counter-based stream cipher generator) seeded
//! through `SeedableRng::seed_from_u64`. Its output is fixed by the algorithm,
//! independent of platform and endianness, so pinned seeds reproduce the same
//! sample everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}
