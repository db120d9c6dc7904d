//! Reproducible random streams.
//!
//! Every stochastic draw comes from a ChaCha generator keyed by one 64-bit
//! seed and selected by a stream index, so results do not depend on the order
//! in which independent streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
