//! Named random sub-streams derived from one user seed.
//!
//! Every stream is a ChaCha8 generator seeded with the same 64-bit seed and a
//! distinct stream id, so changing how many draws one component makes never
//! shifts the numbers another component sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Task,
    Init,
    Candidates,
    Noise,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Task => 1,
            Stream::Init => 2,
            Stream::Candidates => 3,
            Stream::Noise => 4,
        }
    }
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Uniform draw on `[-scale, scale]`.
#[inline]
pub(crate) fn symmetric(rng: &mut impl Rng, scale: f64) -> f64 {
    scale * (2.0 * rng.random::<f64>() - 1.0)
}
