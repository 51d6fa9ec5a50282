use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::blocks::{ChimbParams, CvimParams};
use crate::params::{ParameterStore, Slot};
use crate::tensor::{ConvSpec, ParamTensor};

pub(crate) fn shallow_spec(c: usize) -> ConvSpec {
    ConvSpec::dense(3, c, 3)
}

pub(crate) fn reconstruct_spec(c: usize, scale: usize) -> ConvSpec {
    ConvSpec::dense(c, 3 * scale * scale, 3)
}

/// Every parameter the configuration needs, in canonical order:
/// shallow conv, then per block the CHIMB and CVIM, then reconstruction.
pub fn expected_parameters(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let c = config.channels;
    let mut out = Vec::new();
    Slot::conv("shallow", shallow_spec(c)).expand("", &mut out);
    for i in 0..config.num_blocks {
        for slot in ChimbParams::layout(c) {
            slot.expand(&format!("blocks.{i}.chimb."), &mut out);
        }
        for slot in CvimParams::layout(c) {
            slot.expand(&format!("blocks.{i}.cvim."), &mut out);
        }
    }
    Slot::conv("reconstruct", reconstruct_spec(c, config.scale)).expand("", &mut out);
    out
}

/// Parameter totals per part of the network. Weights shared by the two
/// branches are counted once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub shallow: usize,
    pub chimb_per_block: usize,
    pub cvim_per_block: usize,
    pub num_blocks: usize,
    pub reconstruct: usize,
}

impl ParamBreakdown {
    pub fn total(&self) -> usize {
        self.shallow + self.num_blocks * (self.chimb_per_block + self.cvim_per_block) + self.reconstruct
    }
}

pub fn param_breakdown(config: &ModelConfig) -> ParamBreakdown {
    let c = config.channels;
    let sum = |slots: Vec<Slot>| slots.iter().map(Slot::param_count).sum();
    ParamBreakdown {
        shallow: shallow_spec(c).param_count(),
        chimb_per_block: sum(ChimbParams::layout(c)),
        cvim_per_block: sum(CvimParams::layout(c)),
        num_blocks: config.num_blocks,
        reconstruct: reconstruct_spec(c, config.scale).param_count(),
    }
}

pub fn param_count(config: &ModelConfig) -> usize {
    param_breakdown(config).total()
}

/// Deterministic initialization: conv weights uniform in `±1/√fan_in`,
/// biases zero, layer-norm affine identity, cross-view fusion scales zero.
pub fn init_parameters(config: &ModelConfig, seed: u64) -> ParameterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    for (path, dims) in expected_parameters(config) {
        let tensor = if path.ends_with(".weight") {
            let fan_in: usize = dims[1..].iter().product();
            let bound = 1.0 / (fan_in as f32).sqrt();
            let n = dims.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            ParamTensor::new(dims, data).expect("layout dims")
        } else if path.ends_with(".gamma") {
            ParamTensor::full(dims, 1.0)
        } else {
            // biases, layer-norm shifts and the cross-view fusion scales
            ParamTensor::zeros(dims)
        };
        store.insert(path, tensor);
    }
    store
}

/// Returns `store` with every left-view cross-view parameter exchanged for
/// its right-view counterpart.
pub fn mirror_store(store: &ParameterStore) -> ParameterStore {
    const PAIRS: [(&str, &str); 3] = [
        (".cvim.ln_left.", ".cvim.ln_right."),
        (".cvim.l2r.", ".cvim.r2l."),
        (".cvim.gamma_left", ".cvim.gamma_right"),
    ];
    let mut out = ParameterStore::new();
    for (path, tensor) in store.iter() {
        let mut mapped = path.to_string();
        for (a, b) in PAIRS {
            if path.contains(a) {
                mapped = path.replacen(a, b, 1);
            } else if path.contains(b) {
                mapped = path.replacen(b, a, 1);
            }
        }
        out.insert(mapped, tensor.clone());
    }
    out
}
