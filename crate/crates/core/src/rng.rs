//! Keyed randomness streams.
//!
//! Every stream is a ChaCha8 generator whose 32-byte seed is the SHA-256
//! digest of a purpose tag and a list of integer keys. Proposal batches are
//! keyed by `(seed, t)` only, so every strategy and penalty weight sees the
//! same individuals at a given time step; decision streams additionally
//! carry a cell key derived from the strategy and penalty weight.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn derive_rng(tag: &str, keys: &[u64]) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for k in keys {
        hasher.update(k.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Hash a string label into a 64-bit key.
pub fn label_key(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    pub seed: u64,
    pub cell: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed, cell: 0 }
    }

    /// Streams for one experiment cell (strategy and penalty weight).
    pub fn for_cell(seed: u64, strategy: &str, lambda: f64) -> Self {
        let cell = label_key(strategy) ^ lambda.to_bits().rotate_left(17);
        Self { seed, cell }
    }

    pub fn proposals(&self, t: usize) -> StreamRng {
        derive_rng("proposals", &[self.seed, t as u64])
    }

    pub fn decisions(&self, t: usize) -> StreamRng {
        derive_rng("decisions", &[self.seed, t as u64, self.cell])
    }

    pub fn updates(&self, t: usize) -> StreamRng {
        derive_rng("updates", &[self.seed, t as u64, self.cell])
    }

    /// Held-out evaluation sample, shared by all cells of a seed.
    pub fn test_set(&self) -> StreamRng {
        derive_rng("test-set", &[self.seed])
    }

    /// Dataset split, shared by all cells of a seed.
    pub fn setup(&self) -> StreamRng {
        derive_rng("setup", &[self.seed])
    }

    /// Initialization bootstrap, shared by all cells of a seed.
    pub fn init(&self) -> StreamRng {
        derive_rng("init", &[self.seed])
    }
}
