//! Inference engine for a two-branch stereo image super-resolution network
//! built from cross-hierarchy information mining blocks and cross-view
//! interaction modules.
//!
//! ```no_run
//! use cvhssr::{init_parameters, Model, ModelConfig, Preset, StereoPair};
//! # fn main() -> cvhssr::Result<()> {
//! let config = ModelConfig::preset(Preset::Tiny, 4)?;
//! let model = Model::new(config, &init_parameters(&config, 0))?;
//! let left = cvhssr::io::load_png("lr0.png")?;
//! let right = cvhssr::io::load_png("lr1.png")?;
//! let sr = model.forward(&StereoPair::new(left, right)?)?;
//! cvhssr::io::save_png(sr.left(), "sr0.png")?;
//! # Ok(())
//! # }
//! ```

pub mod blocks;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod params;
pub mod tensor;
pub mod verify;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, ImageError, Result, WeightFileError};
pub use model::{
    init_parameters, param_breakdown, param_count, Model, ModelConfig, Preset, StereoPair,
};
pub use params::ParameterStore;
pub use tensor::{ParamTensor, Tensor};
