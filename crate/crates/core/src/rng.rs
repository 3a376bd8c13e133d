//! Per-trial random streams.
//!
//! Trial `i` of a run seeded with `seed` draws from ChaCha stream `i` of the
//! generator keyed by `seed`, so results do not depend on how trials are
//! scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
