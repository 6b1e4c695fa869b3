use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent, reproducible generator for unit of work `stream` under
/// `seed`. Streams never overlap, so per-run and per-trajectory generators
/// can be created in any order on any thread.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream numbers used for the different consumers of one seed.
pub(crate) const STREAM_SPLIT: u64 = 0;
pub(crate) const STREAM_FIT: u64 = 1;
pub(crate) const STREAM_TRAJECTORY_BASE: u64 = 1 << 32;
