use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::{ParameterStore, Slot};
use crate::tensor::{ParamTensor, Tensor};

/// Uniform values in [-0.5, 0.5).
pub fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-0.5..0.5))
}

/// Every slot under `prefix` filled with values in [-0.5, 0.5), including
/// biases, norms and fusion scales.
pub fn random_store(prefix: &str, slots: &[Slot], seed: u64) -> ParameterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::new();
    for slot in slots {
        slot.expand(&format!("{prefix}."), &mut paths);
    }
    let mut store = ParameterStore::new();
    for (path, dims) in paths {
        let n = dims.iter().product();
        let data = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        store.insert(path, ParamTensor::new(dims, data).unwrap());
    }
    store
}
