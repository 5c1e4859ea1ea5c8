//! Deterministic random streams.
//!
//! Every stochastic task owns a ChaCha8 generator seeded with
//! `base_seed ^ task_index`. A task that must retry draws from the same key
//! on a different ChaCha stream, so retries never collide with other tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream for task `task` under `base_seed`.
pub fn stream(base_seed: u64, task: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(base_seed ^ task)
}

/// Stream for the `attempt`-th retry of a task. Attempt 0 is [`stream`].
pub fn retry_stream(base_seed: u64, task: u64, attempt: u64) -> Stream {
    let mut rng = stream(base_seed, task);
    rng.set_stream(attempt);
    rng
}
