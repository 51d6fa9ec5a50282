//! The two repeated units of the network: the intra-view mining block
//! ([`chimb`]) and the cross-view interaction module ([`cvim`]).

pub mod chimb;
pub mod cvim;

pub use chimb::{
    channel_attention, chimb_forward, large_kernel_attention, nonlinear_gate, simple_gate,
    ChimbParams,
};
pub use cvim::{cross_view_attention, cvim_forward, row_attention, CvimParams, DirectionParams};

/// Local pooling window used by channel attention when test-time local
/// conversion is enabled, in feature-map pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolWindow {
    pub height: usize,
    pub width: usize,
}

impl PoolWindow {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }
}

impl std::fmt::Display for PoolWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl std::str::FromStr for PoolWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("window `{s}` is not of the form HxW"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("window `{s}`: `{v}` is not a positive integer"))
        };
        Ok(Self::new(parse(h)?, parse(w)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_window() {
        assert_eq!("8x16".parse::<PoolWindow>().unwrap(), PoolWindow::new(8, 16));
        assert!("8".parse::<PoolWindow>().is_err());
        assert!("0x4".parse::<PoolWindow>().is_err());
    }
}
