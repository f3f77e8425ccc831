//! Seed derivation tree.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a root
//! `u64` through [`derive`]. A child seed depends only on the parent seed
//! and a (label, index) pair, so streams are independent of the order in
//! which they are requested and of the worker count.
//!
//! ```text
//! root
//! ├── "instance"           ground-truth factors
//! ├── "schedule"
//! │   └── "graph"[t]       one stream per graph t = 0..=2N
//! ├── "svd-init"           starting block for the initial truncated SVD
//! └── "subset-deviation"   Monte Carlo subset draws
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INSTANCE: &str = "instance";
pub const SCHEDULE: &str = "schedule";
pub const GRAPH: &str = "graph";
pub const SVD_INIT: &str = "svd-init";
pub const SUBSET_DEVIATION: &str = "subset-deviation";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(label, index)` under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label keeps the mapping stable across releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(parent ^ h).wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, label: &str, index: u64) -> ChaCha8Rng {
    rng(derive(parent, label, index))
}
