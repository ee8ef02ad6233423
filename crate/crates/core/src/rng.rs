//! Seeding. Every random draw in a run comes from one master seed: each
//! consumer gets its own ChaCha8 stream, selected by `(purpose << 32) | index`
//! on a generator keyed by the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent consumers of randomness within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    /// Network weight initialisation.
    Init = 1,
    /// Training-episode environment noise and resets.
    TrainEnv = 2,
    /// Exploration draws of the behaviour policy.
    Explore = 3,
    /// Replay minibatch sampling.
    Replay = 4,
    /// Evaluation episodes; `index` selects the evaluation point.
    Eval = 5,
    /// Policy draws during evaluation.
    EvalPolicy = 6,
}

/// Generator seeded directly from `seed` (stream 0).
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The `index`-th generator of `purpose` under `master`.
pub fn stream(master: u64, purpose: Stream, index: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}
