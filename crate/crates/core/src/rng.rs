//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha stream derived from a named
//! seed plus a label, so independent consumers never share state and a run is
//! reproducible from its config alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream keyed by `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Stable 64-bit digest of arbitrary bytes.
pub fn digest64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    let d = hasher.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
