//! Deterministic random streams. Every consumer of randomness draws from its
//! own ChaCha stream keyed by the master seed, so changing how one quantity is
//! sampled never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Weights,
    InitialState,
    Trials,
}

impl Stream {
    fn label(self) -> u64 {
        match self {
            Stream::Placement => 0x01,
            Stream::Weights => 0x02,
            Stream::InitialState => 0x03,
            Stream::Trials => 0x04,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.label());
    rng
}
