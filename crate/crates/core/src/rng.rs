//! Named random substreams.
//!
//! Every entity that consumes randomness owns a ChaCha8 stream whose 32-byte
//! seed is `SHA-256(master_seed_le || label || 0x00 || entity_id_le)`.
//! Streams are keyed by entity id rather than by position in any array, so
//! pruning a lab or adding an observer never shifts another entity's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator behind every substream.
pub type Stream = ChaCha8Rng;

pub const LAB: &str = "lab";
pub const REVIEWER: &str = "reviewer";
pub const LIFECYCLE: &str = "lifecycle";
pub const INIT: &str = "init";

/// Derives substreams from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed_bytes(&self, label: &str, entity: u64) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update([0u8]);
        hasher.update(entity.to_le_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        seed
    }

    pub fn stream(&self, label: &str, entity: u64) -> Stream {
        Stream::from_seed(self.seed_bytes(label, entity))
    }
}
