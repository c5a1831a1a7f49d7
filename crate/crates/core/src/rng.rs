//! Counter-based seeding: every Monte Carlo trial owns an independent ChaCha
//! stream selected by `(master_seed, trial_index)`, so a trial can be replayed
//! in isolation and results do not depend on how trials are spread over
//! workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
