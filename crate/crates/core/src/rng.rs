//! Counter-based, splittable random streams.
//!
//! Every random quantity in a run comes from its own ChaCha8 stream, selected
//! by a [`StreamKey`] of (master seed, run coordinates, purpose). ChaCha is a
//! counter-mode generator, so a stream position can be saved and restored
//! exactly, and streams for different keys never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// What a stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Data,
    Xi,
    Direction,
    Tstar,
    Init,
}

impl Purpose {
    pub const ALL: [Purpose; 5] = [
        Purpose::Data,
        Purpose::Xi,
        Purpose::Direction,
        Purpose::Tstar,
        Purpose::Init,
    ];

    fn code(self) -> u64 {
        match self {
            Purpose::Data => 1,
            Purpose::Xi => 2,
            Purpose::Direction => 3,
            Purpose::Tstar => 4,
            Purpose::Init => 5,
        }
    }
}

/// Coordinates of one run inside an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunId {
    pub algorithm: u16,
    pub grid_index: u16,
    pub repetition: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub run: RunId,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(master_seed: u64, run: RunId, purpose: Purpose) -> Self {
        StreamKey {
            master_seed,
            run,
            purpose,
        }
    }

    /// ChaCha stream selector. Bit-packs the run coordinates and purpose, so
    /// distinct keys under one master seed always select distinct streams.
    pub fn stream_id(&self) -> u64 {
        (self.purpose.code() << 48)
            | (u64::from(self.run.algorithm) << 32)
            | (u64::from(self.run.grid_index) << 16)
            | u64::from(self.run.repetition)
    }
}

/// Saved position of a stream, enough to resume it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPosition {
    pub key: StreamKey,
    pub word_pos: u128,
}

#[derive(Clone, Debug)]
pub struct StreamRng {
    key: StreamKey,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(key: StreamKey) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(key.master_seed);
        inner.set_stream(key.stream_id());
        StreamRng { key, inner }
    }

    /// Stream for standalone use outside an experiment grid.
    pub fn from_seed(seed: u64, purpose: Purpose) -> Self {
        StreamRng::new(StreamKey::new(seed, RunId::default(), purpose))
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn position(&self) -> StreamPosition {
        StreamPosition {
            key: self.key,
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn restore(position: StreamPosition) -> Self {
        let mut rng = StreamRng::new(position.key);
        rng.inner.set_word_pos(position.word_pos);
        rng
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// SplitMix64 finalizer; expands a 64-bit sample id into well-mixed words.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
