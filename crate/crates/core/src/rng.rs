//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 generators. A seed plus a [`Stream`]
//! tag selects an independent sequence, so data generation, splitting,
//! initialization and shuffling never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generate = 1,
    Split = 2,
    Init = 3,
    Shuffle = 4,
    Sweep = 5,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
