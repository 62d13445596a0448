//! Counter-based random streams: one independent ChaCha stream per `(seed, index)`,
//! so work can be split across threads without changing any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
