//! Named seed streams.
//!
//! All randomness in a run derives from one root seed. Each consumer asks for
//! a stream by label and index, so adding a consumer never shifts another's
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{splitmix64, token_hash};

pub type Rng = ChaCha8Rng;

/// Seed for stream `label`/`index` under `root`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(token_hash(label, root) ^ splitmix64(index.wrapping_add(0x51_7cc1_b727_220a)))
}

pub fn stream(root: u64, label: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(root, label, index))
}
