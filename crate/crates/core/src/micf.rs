//! Joint design of several OFDM pulses by modified iterative clipping and
//! filtering (MICF), and the SNR degradation factor used to score them.
//!
//! Each iteration oversamples every pulse in time, forces the zero head and
//! tail, clips the peaks of the non-zero part to a target PAPR, returns to
//! the in-band subcarriers, and finally clips the total per-subcarrier power
//! of all pulses into a band around its mean. After the last iteration the
//! pulses are cut to their support and normalised at the base rate.

use std::io::Write;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cod::{design_for, place_blocks};
use crate::dsp::{papr_db, ComplexSeq, UnitaryDft, C64};
use crate::error::{invalid, Result};
use crate::layout::Layout;
use crate::waveform::WaveformSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicfConfig {
    pub subcarriers: usize,
    pub range_cells: usize,
    pub eta_max: usize,
    pub num_tx: usize,
    /// Non-zero pulses designed jointly.
    pub num_pulses: usize,
    pub iterations: usize,
    pub papr_target_db: f64,
    /// Relative half-width of the allowed per-subcarrier power band.
    pub freq_clip: f64,
    pub oversampling: usize,
    pub seed: u64,
}

impl MicfConfig {
    /// N = 302, M = 96, eta_max = 40 (N_t = 33), P = 4, Q = 8,
    /// PAPR target 0.1 dB, 10 % power band, L = 4.
    pub fn set_a() -> Self {
        Self {
            subcarriers: 302,
            range_cells: 96,
            eta_max: 40,
            num_tx: 2,
            num_pulses: 4,
            iterations: 8,
            papr_target_db: 0.1,
            freq_clip: 0.1,
            oversampling: 4,
            seed: 0,
        }
    }

    /// Same swath as [`MicfConfig::set_a`] with N = 309 (N_t = 40), two
    /// transmitters and two pulses.
    pub fn set_b() -> Self {
        Self {
            subcarriers: 309,
            num_pulses: 2,
            ..Self::set_a()
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        let layout = Layout::new(self.subcarriers, self.range_cells, self.eta_max)?;
        let nt = layout.nonzero_len();
        if self.num_pulses == 0 || nt < self.num_pulses {
            return invalid(format!(
                "need 1 <= P <= N_t; got P = {} with N_t = {nt}",
                self.num_pulses
            ));
        }
        if self.num_tx == 0 {
            return invalid("transmitter count must be at least 1");
        }
        if !(self.freq_clip > 0.0 && self.freq_clip < 1.0) {
            return invalid(format!("frequency clip factor {} must lie in (0, 1)", self.freq_clip));
        }
        if self.oversampling == 0 || self.iterations == 0 {
            return invalid("oversampling and iteration count must be at least 1");
        }
        if !self.papr_target_db.is_finite() {
            return invalid("PAPR target must be finite");
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    /// Frequency-domain weights, one per pulse.
    pub pulses: Vec<ComplexSeq>,
    /// Matching base-rate time sequences (exactly zero off the support).
    pub time: Vec<ComplexSeq>,
    pub per_pulse_papr_db: Vec<f64>,
    pub mean_papr_db: f64,
    pub xi_db: f64,
    pub iterations_run: usize,
}

/// SNR degradation factor in dB: `10 log10(N^2 T / sum_k (sum_p |S_k^(p)|^2)^-1)`
/// after renormalising the total energy to `1/T`. Never positive; zero
/// exactly when the total power is flat. `-inf` if some subcarrier is empty.
pub fn xi_db(pulses: &[ComplexSeq], num_tx: usize) -> f64 {
    let Some(n) = pulses.first().map(|p| p.len()) else {
        return f64::NEG_INFINITY;
    };
    let profile: Vec<f64> = (0..n)
        .map(|k| pulses.iter().map(|s| s[k].norm_sqr()).sum())
        .collect();
    if profile.iter().any(|&p| p == 0.0) {
        return f64::NEG_INFINITY;
    }
    let t = num_tx as f64;
    let total: f64 = profile.iter().sum();
    let norm = 1.0 / (t * total);
    let inv_sum: f64 = profile.iter().map(|p| 1.0 / (p * norm)).sum();
    10.0 * ((n * n) as f64 * t / inv_sum).log10()
}

/// Saturates samples in `window` whose magnitude exceeds
/// `A = sqrt(mean power over window * 10^(papr/10))`, keeping their phase.
pub fn time_clip(x: &[C64], papr_target_db: f64, window: Range<usize>) -> ComplexSeq {
    let mut out = x.to_vec();
    time_clip_in_place(&mut out, papr_target_db, window);
    out
}

fn time_clip_in_place(x: &mut [C64], papr_target_db: f64, window: Range<usize>) {
    let seg = &mut x[window];
    if seg.is_empty() {
        return;
    }
    let mean = seg.iter().map(|v| v.norm_sqr()).sum::<f64>() / seg.len() as f64;
    let limit = (mean * 10f64.powf(papr_target_db / 10.0)).sqrt();
    for v in seg.iter_mut() {
        let mag = v.norm();
        if mag > limit {
            *v *= limit / mag;
        }
    }
}

/// Rescales all pulses at each subcarrier so the total power lies within
/// `[Pav (1 - g), Pav (1 + g)]`, `Pav` being its mean over subcarriers.
/// Returns `Pav`.
pub fn frequency_clip(pulses: &mut [ComplexSeq], g: f64) -> f64 {
    let Some(n) = pulses.first().map(|p| p.len()) else {
        return 0.0;
    };
    let profile: Vec<f64> = (0..n)
        .map(|k| pulses.iter().map(|s| s[k].norm_sqr()).sum())
        .collect();
    let avg = profile.iter().sum::<f64>() / n as f64;
    let (hi, lo) = (avg * (1.0 + g), avg * (1.0 - g));
    for (k, &pk) in profile.iter().enumerate() {
        let factor = if pk > hi {
            (hi / pk).sqrt()
        } else if pk < lo && pk > 0.0 {
            (lo / pk).sqrt()
        } else {
            continue;
        };
        for s in pulses.iter_mut() {
            s[k] *= factor;
        }
    }
    avg
}

pub fn micf_design(cfg: &MicfConfig) -> Result<DesignResult> {
    micf_design_traced(cfg, |_, _, _| {})
}

/// [`micf_design`] with a callback receiving the iteration index, the mean
/// subcarrier power the frequency clip worked against, and the pulses right
/// after that clip.
pub fn micf_design_traced(
    cfg: &MicfConfig,
    mut on_iteration: impl FnMut(usize, f64, &[ComplexSeq]),
) -> Result<DesignResult> {
    let layout = cfg.layout()?;
    let n = layout.subcarriers;
    let l = cfg.oversampling;
    let p_count = cfg.num_pulses;
    let support = layout.support();
    let window = support.start * l..support.end * l;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = 1.0 / ((n * cfg.num_tx * p_count) as f64).sqrt();
    let mut pulses: Vec<ComplexSeq> = (0..p_count)
        .map(|_| {
            (0..n)
                .map(|_| C64::from_polar(amp, std::f64::consts::TAU * rng.random::<f64>()))
                .collect()
        })
        .collect();

    let big = UnitaryDft::new(n * l)?;
    let mut buf = vec![C64::new(0.0, 0.0); n * l];
    for q in 0..cfg.iterations {
        for s in pulses.iter_mut() {
            buf.fill(C64::new(0.0, 0.0));
            buf[..n].copy_from_slice(s);
            big.inverse(&mut buf);
            buf[..window.start].fill(C64::new(0.0, 0.0));
            buf[window.end..].fill(C64::new(0.0, 0.0));
            time_clip_in_place(&mut buf, cfg.papr_target_db, window.clone());
            big.forward(&mut buf);
            s.copy_from_slice(&buf[..n]);
        }
        let avg = frequency_clip(&mut pulses, cfg.freq_clip);
        on_iteration(q, avg, &pulses);
    }

    let small = UnitaryDft::new(n)?;
    let norm_scale = (cfg.num_tx * p_count) as f64;
    let mut time = Vec::with_capacity(p_count);
    for s in pulses.iter_mut() {
        let mut t = s.clone();
        small.inverse(&mut t);
        t[..support.start].fill(C64::new(0.0, 0.0));
        t[support.end..].fill(C64::new(0.0, 0.0));
        let e: f64 = t.iter().map(|v| v.norm_sqr()).sum();
        if e == 0.0 {
            return invalid("design collapsed to an all-zero pulse");
        }
        let k = 1.0 / (norm_scale * e).sqrt();
        t.iter_mut().for_each(|v| *v *= k);
        s.copy_from_slice(&t);
        small.forward(s);
        time.push(t);
    }

    let per_pulse_papr_db = pulses
        .iter()
        .map(|s| papr_db(s, l, support.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mean_papr_db = per_pulse_papr_db.iter().sum::<f64>() / p_count as f64;
    let xi = xi_db(&pulses, cfg.num_tx);
    Ok(DesignResult {
        pulses,
        time,
        per_pulse_papr_db,
        mean_papr_db,
        xi_db: xi,
        iterations_run: cfg.iterations,
    })
}

/// Runs the design and places the pulses on the orthogonal design for
/// `num_tx` (one block per group of design variables).
pub fn micf_waveform_set(cfg: &MicfConfig) -> Result<(DesignResult, WaveformSet)> {
    let design = design_for(cfg.num_tx)?;
    if cfg.num_pulses % design.num_vars() != 0 {
        return invalid(format!(
            "{} transmitters need a multiple of {} designed pulses, got {}",
            cfg.num_tx,
            design.num_vars(),
            cfg.num_pulses
        ));
    }
    let result = micf_design(cfg)?;
    let ws = place_blocks(&design, cfg.layout()?, &result.pulses)?;
    Ok((result, ws))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub xi_min_db: f64,
    pub papr_max_db: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            xi_min_db: -0.08,
            papr_max_db: 2.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub mean_papr_db: f64,
    pub xi_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub trials: Vec<TrialOutcome>,
    /// Sorted ascending; empirical CDF at index i is (i + 1) / len.
    pub mean_papr_sorted: Vec<f64>,
    pub xi_sorted: Vec<f64>,
    pub qualifying: usize,
}

impl MonteCarloSummary {
    pub fn median_papr(&self) -> f64 {
        median(&self.mean_papr_sorted)
    }

    pub fn median_xi(&self) -> f64 {
        median(&self.xi_sorted)
    }

    /// Highest-`xi` trial among those meeting `thresholds`, or the highest-`xi`
    /// trial overall when none does.
    pub fn best_trial(&self, thresholds: Thresholds) -> &TrialOutcome {
        let by_xi = |a: &&TrialOutcome, b: &&TrialOutcome| a.xi_db.total_cmp(&b.xi_db).then(b.seed.cmp(&a.seed));
        self.trials
            .iter()
            .filter(|o| o.xi_db >= thresholds.xi_min_db && o.mean_papr_db <= thresholds.papr_max_db)
            .max_by(by_xi)
            .or_else(|| self.trials.iter().max_by(by_xi))
            .expect("summaries hold at least one trial")
    }

    /// `metric,value,probability` rows for both empirical CDFs.
    pub fn write_cdf_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value", "probability"])
            .map_err(crate::waveform::csv_err)?;
        for (name, values) in [("mean_papr_db", &self.mean_papr_sorted), ("xi_db", &self.xi_sorted)] {
            let n = values.len() as f64;
            for (i, v) in values.iter().enumerate() {
                out.write_record(&[name.to_string(), format!("{v:e}"), format!("{:e}", (i + 1) as f64 / n)])
                    .map_err(crate::waveform::csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs `trials` designs with seeds `cfg.seed .. cfg.seed + trials` (in
/// parallel, order-independent) and counts those meeting both thresholds.
pub fn monte_carlo_cdf(cfg: &MicfConfig, trials: usize, thresholds: Thresholds) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return invalid("trial count must be at least 1");
    }
    cfg.layout()?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let r = micf_design(&MicfConfig { seed, ..cfg.clone() })?;
            Ok(TrialOutcome {
                seed,
                mean_papr_db: r.mean_papr_db,
                xi_db: r.xi_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let qualifying = outcomes
        .iter()
        .filter(|o| o.xi_db >= thresholds.xi_min_db && o.mean_papr_db <= thresholds.papr_max_db)
        .count();
    let mut mean_papr_sorted: Vec<f64> = outcomes.iter().map(|o| o.mean_papr_db).collect();
    let mut xi_sorted: Vec<f64> = outcomes.iter().map(|o| o.xi_db).collect();
    mean_papr_sorted.sort_by(f64::total_cmp);
    xi_sorted.sort_by(f64::total_cmp);
    Ok(MonteCarloSummary {
        trials: outcomes,
        mean_papr_sorted,
        xi_sorted,
        qualifying,
    })
}
