//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). A master
//! seed is expanded into a 256-bit key with `SeedableRng::seed_from_u64`, and
//! every independent consumer gets its own 64-bit ChaCha stream id:
//!
//! ```text
//! stream = (replication << 16) | lane
//! ```
//!
//! `lane` is the player index in multi-player runs and 0 otherwise. Streams
//! never overlap, so replications can run in any order or in parallel and
//! still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by every simulation in this crate.
pub type SimRng = ChaCha8Rng;

const LANE_BITS: u32 = 16;

/// Generator for `(replication, lane)` derived from `master_seed`.
pub fn substream(master_seed: u64, replication: u64, lane: u16) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((replication << LANE_BITS) | u64::from(lane));
    rng
}
