//! The full two-branch network.
//!
//! Both views run through the same weights: a 3×3 shallow conv, `N` blocks
//! of (CHIMB on each view, then CVIM across the pair), a 3×3 conv to
//! `3·s²` channels with pixel shuffle, plus a bilinear upsample of the
//! low-resolution input as the global residual.

mod config;
mod layout;

pub use config::{ModelConfig, Preset, DEFAULT_TLC_WINDOW};
pub use layout::{
    expected_parameters, init_parameters, mirror_store, param_breakdown, param_count,
    ParamBreakdown,
};

use crate::blocks::{chimb_forward, cvim_forward, ChimbParams, CvimParams, PoolWindow};
use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::{bilinear_upsample, elementwise_add, pixel_shuffle, Conv2d, Tensor};

/// Left and right images of equal shape, three channels each.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoPair {
    left: Tensor,
    right: Tensor,
}

impl StereoPair {
    pub fn new(left: Tensor, right: Tensor) -> Result<Self> {
        if left.shape() != right.shape() {
            return Err(Error::shape(
                "stereo pair",
                format!(
                    "left is {:?} but right is {:?}",
                    left.shape(),
                    right.shape()
                ),
            ));
        }
        if left.channels() != 3 {
            return Err(Error::shape(
                "stereo pair",
                format!("images must have 3 channels, got {}", left.channels()),
            ));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &Tensor {
        &self.left
    }

    pub fn right(&self) -> &Tensor {
        &self.right
    }

    pub fn into_views(self) -> (Tensor, Tensor) {
        (self.left, self.right)
    }

    /// The pair with left and right exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn height(&self) -> usize {
        self.left.height()
    }

    pub fn width(&self) -> usize {
        self.left.width()
    }
}

#[derive(Clone, Debug)]
struct Block {
    chimb: ChimbParams,
    cvim: CvimParams,
}

/// An immutable, thread-shareable inference object.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    shallow: Conv2d,
    blocks: Vec<Block>,
    reconstruct: Conv2d,
}

impl Model {
    /// Validates `store` against `config` and builds the network.
    pub fn new(config: ModelConfig, store: &ParameterStore) -> Result<Self> {
        config.validate()?;
        store.validate(&expected_parameters(&config))?;
        let c = config.channels;
        let blocks = (0..config.num_blocks)
            .map(|i| {
                Ok(Block {
                    chimb: ChimbParams::from_store(store, &format!("blocks.{i}.chimb"), c)?,
                    cvim: CvimParams::from_store(store, &format!("blocks.{i}.cvim"), c)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            shallow: store.conv("shallow", layout::shallow_spec(c))?,
            blocks,
            reconstruct: store.conv("reconstruct", layout::reconstruct_spec(c, config.scale))?,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scale(&self) -> usize {
        self.config.scale
    }

    /// Same weights, with channel-attention pooling switched between global
    /// and local (`window` in low-resolution feature pixels).
    pub fn with_tlc(mut self, enabled: bool, window: PoolWindow) -> Result<Self> {
        if window.height == 0 || window.width == 0 {
            return Err(Error::InvalidArgument("TLC window must be positive".into()));
        }
        self.config.tlc_enabled = enabled;
        self.config.tlc_window = window;
        Ok(self)
    }

    pub fn forward(&self, input: &StereoPair) -> Result<StereoPair> {
        let tlc = self.config.tlc();
        let (l, r) = rayon::join(
            || self.shallow.forward(input.left()),
            || self.shallow.forward(input.right()),
        );
        let (mut left, mut right) = (l?, r?);
        for block in &self.blocks {
            let (l, r) = rayon::join(
                || chimb_forward(&left, &block.chimb, tlc),
                || chimb_forward(&right, &block.chimb, tlc),
            );
            (left, right) = cvim_forward(&l?, &r?, &block.cvim)?;
        }
        let (out_left, out_right) = rayon::join(
            || self.reconstruct_view(&left, input.left()),
            || self.reconstruct_view(&right, input.right()),
        );
        StereoPair::new(out_left?, out_right?)
    }

    fn reconstruct_view(&self, features: &Tensor, image: &Tensor) -> Result<Tensor> {
        let s = self.config.scale;
        let up = pixel_shuffle(&self.reconstruct.forward(features)?, s)?;
        elementwise_add(&up, &bilinear_upsample(image, s)?)
    }
}
