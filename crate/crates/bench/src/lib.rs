//! Fixtures shared by the benchmarks.

use psc_core::data::{generate_synthetic, AtomSpec};
use psc_core::sampler::{initial_state, FrameInit};
use psc_core::{LabeledDataset, ModelState, PriorConfig, SyntheticSpec, TrainingData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A WBC-sized problem: 455 rows, 9 features, 2 classes.
pub fn synthetic(m: usize, k: usize, n: usize) -> (LabeledDataset, ModelState) {
    let spec = SyntheticSpec {
        m,
        k,
        c: 2,
        n,
        atoms: AtomSpec::Random {
            count: 4,
            separation: 4.0,
            purity: 0.9,
        },
        sigma: vec![1.0; k],
        sigma0: 0.5,
        frame: None,
        eta: None,
        seed: 11,
    };
    generate_synthetic(&spec).expect("valid spec")
}

/// Training data plus an initialized sampler state with `T = 20`.
pub fn sampler_fixture(m: usize, k: usize, n: usize) -> (TrainingData, ModelState, PriorConfig) {
    let (data, _) = synthetic(m, k, n);
    let td = data.training_data().expect("training data");
    let prior = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let state = initial_state(&td, k, &prior, 20, FrameInit::Principal, &mut rng).expect("initial state");
    (td, state, prior)
}
