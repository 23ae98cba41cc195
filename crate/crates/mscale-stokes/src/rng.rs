//! Deterministic random streams.
//!
//! Every random draw in a run comes from a ChaCha8 generator keyed by the
//! run seed and a stream id, so each consumer gets an independent sequence
//! and consumers never perturb one another. Per-epoch streams make resumed
//! runs bit-identical: epoch k draws the same points whether the process
//! trained straight through or restarted from a checkpoint.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_INIT_U: u64 = 1;
pub(crate) const STREAM_INIT_P: u64 = 2;
pub(crate) const STREAM_INIT_Q: u64 = 3;
pub(crate) const STREAM_INIT_AUX: u64 = 4;
pub(crate) const STREAM_INTERIOR: u64 = 5;
pub(crate) const STREAM_EVAL: u64 = 6;

pub(crate) fn shuffle_stream(epoch: u64) -> u64 {
    (1 << 32) | epoch
}

pub(crate) fn boundary_stream(epoch: u64) -> u64 {
    (2 << 32) | epoch
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
