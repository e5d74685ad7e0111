//! Keyed random streams.
//!
//! Every random draw in the pipeline comes from a ChaCha stream whose key is
//! derived from the run seed plus a coordinate (recursion level,
//! instantiation, candidate, purpose). Results therefore do not depend on the
//! order in which tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Candidate coordinate used for draws shared by every candidate of an
/// instantiation (direct links, user positions).
pub const SHARED: u64 = u64::MAX;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Users,
    Candidates,
    Direct(usize),
    BsRis,
    RisUser(usize),
    RandomRis,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Users => 1,
            Purpose::Candidates => 2,
            Purpose::BsRis => 3,
            Purpose::RandomRis => 4,
            Purpose::Direct(k) => (1 << 32) | k as u64,
            Purpose::RisUser(k) => (2 << 32) | k as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub level: u64,
    pub instantiation: u64,
    pub candidate: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            level: 0,
            instantiation: 0,
            candidate: SHARED,
        }
    }

    pub fn level(self, level: u64) -> Self {
        Self { level, ..self }
    }

    pub fn instantiation(self, instantiation: u64) -> Self {
        Self {
            instantiation,
            candidate: SHARED,
            ..self
        }
    }

    pub fn candidate(self, candidate: u64) -> Self {
        Self { candidate, ..self }
    }

    pub fn shared(self) -> Self {
        Self {
            candidate: SHARED,
            ..self
        }
    }

    pub fn rng(self, purpose: Purpose) -> ChaCha8Rng {
        let words = [
            self.seed,
            self.level,
            self.instantiation,
            self.candidate,
            purpose.code(),
        ];
        let mut state = 0x243f_6a88_85a3_08d3u64;
        for w in words {
            state = splitmix64(state ^ w);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
