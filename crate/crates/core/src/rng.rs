//! Seed fan-out shared by the samplers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for task `index` of subsystem `stream`: seeded with `seed + index`
/// on a stream private to the subsystem.
pub fn task_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    rng.set_stream(stream);
    rng
}
