use std::path::{Path, PathBuf};

use serde::Deserialize;

use cpofdm::micf::{MicfConfig, Thresholds};
use cpofdm::scene::SceneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Micf,
    Paraunitary,
}

fn d_iterations() -> usize {
    8
}
fn d_papr() -> f64 {
    0.1
}
fn d_clip() -> f64 {
    0.1
}
fn d_oversampling() -> usize {
    4
}
fn d_xi_min() -> f64 {
    Thresholds::default().xi_min_db
}
fn d_papr_max() -> f64 {
    Thresholds::default().papr_max_db
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub method: Method,
    pub subcarriers: usize,
    pub range_cells: usize,
    pub eta_max: usize,
    pub num_tx: usize,
    /// Designed (non-zero) pulses; defaults to the design's variable count.
    pub num_pulses: Option<usize>,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_papr")]
    pub papr_target_db: f64,
    #[serde(default = "d_clip")]
    pub freq_clip: f64,
    #[serde(default = "d_oversampling")]
    pub oversampling: usize,
    pub seed: Option<u64>,
    /// MICF only: try this many seeds and keep the best one.
    pub search_trials: Option<usize>,
    #[serde(default = "d_xi_min")]
    pub xi_min_db: f64,
    #[serde(default = "d_papr_max")]
    pub papr_max_db: f64,
}

impl DesignSection {
    pub fn micf_config(&self, num_pulses: usize, seed: u64) -> MicfConfig {
        MicfConfig {
            subcarriers: self.subcarriers,
            range_cells: self.range_cells,
            eta_max: self.eta_max,
            num_tx: self.num_tx,
            num_pulses,
            iterations: self.iterations,
            papr_target_db: self.papr_target_db,
            freq_clip: self.freq_clip,
            oversampling: self.oversampling,
            seed,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { xi_min_db: self.xi_min_db, papr_max_db: self.papr_max_db }
    }
}

fn d_repeats() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Noise realizations for the empirical SNR.
    #[serde(default = "d_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub noiseless: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Pcode,
    Fdlfm,
}

fn d_baselines() -> Vec<Baseline> {
    vec![Baseline::Pcode, Baseline::Fdlfm]
}
fn d_kappa() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "d_baselines")]
    pub baselines: Vec<Baseline>,
    /// Phase file for the shared-band codes; generated P4 codes otherwise.
    pub code_file: Option<PathBuf>,
    /// Code and chirp length; defaults to the OFDM non-zero length.
    pub code_len: Option<usize>,
    #[serde(default = "d_kappa")]
    pub lfm_kappa: f64,
    #[serde(default)]
    pub noiseless: bool,
}

fn d_trials() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub subcarriers: usize,
    pub range_cells: usize,
    pub eta_max: usize,
    pub num_tx: usize,
    /// One study per entry.
    pub num_pulses: Vec<usize>,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_papr")]
    pub papr_target_db: f64,
    #[serde(default = "d_clip")]
    pub freq_clip: f64,
    #[serde(default = "d_oversampling")]
    pub oversampling: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_xi_min")]
    pub xi_min_db: f64,
    #[serde(default = "d_papr_max")]
    pub papr_max_db: f64,
}

/// Whole config file. Each command reads the sections it needs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Waveform container from a previous `design` run, relative to the
    /// config file.
    pub waveforms: Option<PathBuf>,
    pub design: Option<DesignSection>,
    pub scene: Option<SceneConfig>,
    pub simulate: Option<SimulateSection>,
    pub compare: Option<CompareSection>,
    pub montecarlo: Option<MonteCarloSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.waveforms.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.compare.as_mut().and_then(|c| c.code_file.as_mut()) {
            resolve(p);
        }
        Ok(cfg)
    }
}
