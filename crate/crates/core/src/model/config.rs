use std::fmt;
use std::str::FromStr;

use crate::blocks::PoolWindow;
use crate::error::{Error, Result};

/// Published model sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 48 channels, 16 blocks.
    Tiny,
    /// 64 channels, 32 blocks.
    Small,
}

impl Preset {
    pub fn channels(self) -> usize {
        match self {
            Preset::Tiny => 48,
            Preset::Small => 64,
        }
    }

    pub fn num_blocks(self) -> usize {
        match self {
            Preset::Tiny => 16,
            Preset::Small => 32,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t" | "tiny" => Ok(Preset::Tiny),
            "s" | "small" => Ok(Preset::Small),
            _ => Err(format!("unknown preset `{s}` (expected t or s)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Tiny => "T",
            Preset::Small => "S",
        })
    }
}

/// Default local pooling window for test-time local conversion: the
/// 30×90 training crop scaled by 1.5.
pub const DEFAULT_TLC_WINDOW: PoolWindow = PoolWindow {
    height: 45,
    width: 135,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub channels: usize,
    pub num_blocks: usize,
    pub scale: usize,
    pub tlc_enabled: bool,
    pub tlc_window: PoolWindow,
}

impl ModelConfig {
    pub fn new(channels: usize, num_blocks: usize, scale: usize) -> Result<Self> {
        let config = Self {
            channels,
            num_blocks,
            scale,
            tlc_enabled: false,
            tlc_window: DEFAULT_TLC_WINDOW,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn preset(preset: Preset, scale: usize) -> Result<Self> {
        Self::new(preset.channels(), preset.num_blocks(), scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::InvalidArgument(format!(
                "scale must be 2 or 4, got {}",
                self.scale
            )));
        }
        if self.channels == 0 {
            return Err(Error::InvalidArgument("channels must be positive".into()));
        }
        if self.tlc_window.height == 0 || self.tlc_window.width == 0 {
            return Err(Error::InvalidArgument("TLC window must be positive".into()));
        }
        Ok(())
    }

    /// The preset this configuration corresponds to, if any.
    pub fn matching_preset(&self) -> Option<Preset> {
        [Preset::Tiny, Preset::Small]
            .into_iter()
            .find(|p| p.channels() == self.channels && p.num_blocks() == self.num_blocks)
    }

    pub(crate) fn tlc(&self) -> Option<PoolWindow> {
        self.tlc_enabled.then_some(self.tlc_window)
    }
}
