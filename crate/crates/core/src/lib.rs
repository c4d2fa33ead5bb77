//! Multi-transmitter CP-OFDM radar: pulse-set design (orthogonal-design
//! placement, paraunitary synthesis, MICF), a discrete channel simulator and
//! the receive chain that recovers range profiles free of inter-range-cell
//! and inter-transmitter interference, plus matched-filter baselines.

pub mod baselines;
pub mod cod;
pub mod cube;
pub mod dsp;
pub mod error;
pub mod layout;
pub mod micf;
pub mod paraunitary;
pub mod reconstruct;
pub mod scene;
pub mod waveform;

pub use error::{Error, Result};
pub use layout::Layout;
pub use waveform::WaveformSet;
