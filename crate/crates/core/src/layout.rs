use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Pulse geometry shared by transmitter and receiver: subcarrier count,
/// range cells in the swath and the largest relative pair delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub subcarriers: usize,
    pub range_cells: usize,
    pub eta_max: usize,
}

impl Layout {
    pub fn new(subcarriers: usize, range_cells: usize, eta_max: usize) -> Result<Self> {
        if range_cells == 0 {
            return invalid("range cell count must be at least 1");
        }
        if subcarriers < eta_max + range_cells {
            return invalid(format!(
                "subcarrier count {subcarriers} must be at least eta_max + M = {}",
                eta_max + range_cells
            ));
        }
        Ok(Self {
            subcarriers,
            range_cells,
            eta_max,
        })
    }

    /// Cyclic prefix length, also the index of the first non-zero sample.
    pub fn cp_len(&self) -> usize {
        self.eta_max + self.range_cells - 1
    }

    /// Length of the non-zero part of a pulse, `N - 2 eta_max - 2M + 3`
    /// (zero when the zero head/tail conditions leave no room).
    pub fn nonzero_len(&self) -> usize {
        (self.subcarriers + 3).saturating_sub(2 * (self.eta_max + self.range_cells))
    }

    /// Base-rate sample range that may be non-zero: `[cp_len, N - cp_len]`.
    pub fn support(&self) -> Range<usize> {
        let start = self.cp_len();
        start..start + self.nonzero_len()
    }

    /// Transmitted sequence length including the cyclic extension.
    pub fn pulse_len(&self) -> usize {
        self.subcarriers + self.cp_len()
    }

    /// Received frame length `N + 2(eta_max + M) - 2`.
    pub fn frame_len(&self) -> usize {
        self.subcarriers + 2 * (self.eta_max + self.range_cells) - 2
    }

    /// Largest deviation from zero outside the support, covering both the
    /// head/tail condition and its time-reversal counterpart.
    pub fn zero_violation(&self, time: &[crate::dsp::C64]) -> f64 {
        let support = self.support();
        time.iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }
}
