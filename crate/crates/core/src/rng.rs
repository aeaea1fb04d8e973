//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! A single 64-bit seed fans out into independent ChaCha streams: one per
//! (trial, role) so that e.g. the jitter draw, the additive-noise draw and a
//! Gibbs chain never consume the same stream even though they share one
//! recorded seed. Derivation is a splitmix64 fold, so it is cheap, stateless
//! and identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream roles hanging off one seed.
pub const STREAM_PRIOR: u64 = 1;
pub const STREAM_JITTER: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_GIBBS: u64 = 4;
pub const STREAM_FISHER: u64 = 5;
pub const STREAM_EM_RESTART: u64 = 6;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a derivation path (cell index, trial index, ...)
/// into a fresh 64-bit seed.
pub fn fold_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state = out ^ p.wrapping_mul(0xD1B5_4A32_D192_ED03);
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha stream for the given role of the given seed.
pub fn substream(seed: u64, role: u64) -> ChaCha8Rng {
    let mut state = fold_seed(seed, &[role]);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
