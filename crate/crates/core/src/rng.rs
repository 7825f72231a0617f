//! Seeded random streams.
//!
//! Every experiment seed fans out into independent ChaCha streams, one per
//! consumer, so that adding draws in one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent consumers of randomness inside one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Channel realizations. Shared by a policy run and its oracle run.
    Channel = 1,
    /// Policy-internal randomisation (Exp3 draws, forced exploration, random baseline).
    Policy = 2,
    /// Synthetic dataset generation.
    Data = 3,
    /// Dirichlet partitioning.
    Partition = 4,
    /// Mini-batch sampling during local SGD.
    Training = 5,
    /// Adversarial state-matrix generation.
    Adversary = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Per-client mini-batch stream, so a client that sits out a round consumes
/// nothing and the others are unaffected.
pub fn client_stream(seed: u64, client: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((client as u64) + 1) << 8 | Stream::Training as u64);
    rng
}
