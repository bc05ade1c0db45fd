//! Deterministic random-stream derivation.
//!
//! Every random draw in an experiment comes from a ChaCha stream keyed by
//! (master seed, purpose, run id, round, agent). Any agent-round can be
//! replayed in isolation, and distinct runs, rounds, and agents never share
//! a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Key domain for world generation.
pub const PURPOSE_WORLD: u64 = 1;
/// Key domain for random graph sampling.
pub const PURPOSE_GRAPH: u64 = 2;
/// Key domain for observation sampling.
pub const PURPOSE_SIGNALS: u64 = 3;
/// Key domain for compression randomness.
pub const PURPOSE_COMPRESS: u64 = 4;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent generator for one (purpose, run, round, agent) cell.
///
/// The key words are chained through a splitmix finalizer so that changing
/// any single component reseeds the whole 256-bit state.
pub fn derive_rng(master: u64, purpose: u64, run: u64, round: u64, agent: u64) -> ChaCha8Rng {
    let mut state = master ^ 0x6c62_272e_07bb_0142;
    let mut words = [0u64; 4];
    let key = [purpose, run, round, agent];
    for (w, k) in words.iter_mut().zip(key) {
        state ^= k.wrapping_mul(0x2545_f491_4f6c_dd1d);
        *w = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Master seed plus run id; hands out per-(round, agent) streams.
#[derive(Clone, Copy, Debug)]
pub struct StreamKey {
    pub master: u64,
    pub run: u64,
}

impl StreamKey {
    pub fn new(master: u64, run: u64) -> Self {
        StreamKey { master, run }
    }

    /// Stream for agent `agent`'s compression draw in round `round`.
    pub fn compression(&self, round: u64, agent: u64) -> ChaCha8Rng {
        derive_rng(self.master, PURPOSE_COMPRESS, self.run, round, agent)
    }

    /// Stream for agent `agent`'s observation in round `round`.
    pub fn signal(&self, round: u64, agent: u64) -> ChaCha8Rng {
        derive_rng(self.master, PURPOSE_SIGNALS, self.run, round, agent)
    }
}
