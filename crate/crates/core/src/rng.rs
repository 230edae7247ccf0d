//! Seed streams for reproducible Monte Carlo runs.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by the root
//! seed. Independent replicates and purposes get disjoint ChaCha streams:
//!
//! ```text
//! stream = replicate * STREAMS_PER_REPLICATE + purpose
//! ```
//!
//! so replicate `i` produces the same numbers no matter how replicates are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAMS_PER_REPLICATE: u64 = 16;

/// What a stream is used for within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Network = 0,
    Innovations = 1,
    Coupling = 2,
    Auxiliary = 3,
}

/// Generator for `(replicate, purpose)` under `root_seed`.
pub fn stream(root_seed: u64, replicate: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(replicate * STREAMS_PER_REPLICATE + purpose as u64);
    rng
}

/// Single generator for one-off runs (replicate 0).
pub fn seeded(root_seed: u64, purpose: Purpose) -> SimRng {
    stream(root_seed, 0, purpose)
}
