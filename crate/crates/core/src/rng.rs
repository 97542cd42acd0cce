//! Reproducible random streams.
//!
//! Every draw in a trial comes from a ChaCha stream keyed by
//! `(master seed, trial index)` and selected by [`Stream`], so any single
//! trial (or any single stage of it) can be replayed in isolation and the
//! order in which stages consume randomness does not matter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams used by one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Distortion = 2,
    CsiNoise = 3,
    HandshakeNoise = 4,
    Scratch = 5,
}

/// Derives per-trial generators from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeder {
    master: u64,
}

impl Seeder {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, trial: u64, stream: Stream) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&trial.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream as u64);
        rng
    }
}
