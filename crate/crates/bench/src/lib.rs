//! Shared fixtures for the criterion benches.

use bblab_core::{Bias, BooleanFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random function on `n` coordinates.
pub fn random_function(n: usize, seed: u64) -> BooleanFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BooleanFunction::from_fn(n, |_| rng.random::<bool>()).expect("bench sizes are valid")
}

pub fn bias() -> Bias {
    Bias::new(0.3).expect("fixed bias")
}
