//! Seed derivation. Every randomized step draws from its own ChaCha stream
//! keyed by `(master seed, purpose, index)`, so adding or reordering steps
//! elsewhere never shifts another step's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    LongTail = 2,
    Gaussian = 3,
    Conflictive = 4,
    Init = 5,
    Shuffle = 6,
    Oversample = 7,
    Fixture = 8,
    RandomWeights = 9,
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 40) | (index & ((1 << 40) - 1)));
    rng
}
