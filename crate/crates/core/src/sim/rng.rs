//! Reproducible random substreams.
//!
//! Every path owns a ChaCha8 stream keyed by the master seed and indexed by
//! the path number, so results do not depend on how paths are scheduled.
//! Nested branches get their own key derived from `(seed, path, node)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep unrelated estimators on disjoint keys.
pub mod tag {
    pub const PATHS: u64 = 0;
    pub const FEYNMAN_KAC: u64 = 0x46_4b;
    pub const BRANCH: u64 = 0x42_52;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(parts: &[u64]) -> [u8; 32] {
    let mut h = 0x6a09_e667_f3bc_c909u64;
    let mut out = [0u8; 32];
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    for chunk in out.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    out
}

pub fn path_rng(seed: u64, domain: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(&[seed, domain]));
    rng.set_stream(path);
    rng
}

pub fn branch_rng(seed: u64, path: u64, node: u64, branch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(&[seed, tag::BRANCH, path, node]));
    rng.set_stream(branch);
    rng
}
