//! Named random streams derived from one master seed.
//!
//! Every consumer of randomness in a run owns its own stream so that, for
//! example, switching resampling on or off leaves the candidate draws intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Candidates = 2,
    Selection = 3,
    Rebalance = 4,
    Data = 5,
    Split = 6,
    Bias = 7,
    Proxy = 8,
}

/// Independent generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
