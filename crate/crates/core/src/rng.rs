//! Seeded randomness.
//!
//! All stochastic draws go through ChaCha8 (`rand_chacha`), whose output is
//! fixed by its algorithm and independent of platform or word size. Each
//! consumer gets its own stream so that, for example, adding a brand does not
//! perturb the trips drawn for the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    World = 1,
    Population = 2,
    Trips = 3,
}

pub fn stream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
