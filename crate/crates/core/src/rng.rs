//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8. Independent
//! work items that share a base seed (benchmark trials, batch mixup
//! entries) use distinct ChaCha stream ids: item `k` draws from stream `k`
//! of the generator keyed by the base seed. Results therefore do not depend
//! on the order or parallelism in which items are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
