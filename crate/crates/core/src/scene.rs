//! Scene description and the discrete received-signal model.
//!
//! Every pulse is transmitted as its `N`-sample IDFT followed by a cyclic
//! extension of `eta_max + M - 1` samples (zero for pulses that obey the
//! zero head/tail conditions). Receiver `b` sees
//! `u[i] = sum_a sum_m d[b,a,m] s_a[i - m - eta[b][a]] + w[i]` for
//! `i = 0 .. N + 2(eta_max + M) - 3`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::dsp::{ComplexSeq, C64};
use crate::error::{invalid, Error, Result};
use crate::layout::Layout;
use crate::waveform::WaveformSet;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Antenna positions (metres) for geometry-derived delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub tx: Vec<[f64; 3]>,
    pub rx: Vec<[f64; 3]>,
    /// Centre of the nearest range cell.
    pub cell0: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryDelays {
    /// `eta[rx][tx]`, rounded to whole samples.
    pub eta: Vec<Vec<usize>>,
    pub tau_min: f64,
    /// `tau[rx][tx]` for the nearest range cell, seconds.
    pub tau0: Vec<Vec<f64>>,
    /// Largest rounding error, in samples.
    pub residual: f64,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Relative pair delays from antenna positions under the far-field model.
pub fn delays_from_geometry(geometry: &Geometry, bandwidth_hz: f64) -> Result<GeometryDelays> {
    if geometry.tx.is_empty() || geometry.rx.is_empty() {
        return invalid("geometry needs at least one transmitter and one receiver");
    }
    let coords = geometry.tx.iter().chain(&geometry.rx).chain(std::iter::once(&geometry.cell0));
    if coords.flatten().any(|v| !v.is_finite()) {
        return invalid("antenna coordinates must be finite");
    }
    if !(bandwidth_hz > 0.0) {
        return invalid("bandwidth must be positive");
    }
    let tx_range: Vec<f64> = geometry.tx.iter().map(|&p| distance(p, geometry.cell0)).collect();
    let rx_range: Vec<f64> = geometry.rx.iter().map(|&p| distance(p, geometry.cell0)).collect();
    let tau0: Vec<Vec<f64>> = rx_range
        .iter()
        .map(|rb| tx_range.iter().map(|ra| (ra + rb) / SPEED_OF_LIGHT).collect())
        .collect();
    let tau_min = tau0.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let mut residual = 0.0f64;
    let mut eta = Vec::with_capacity(tau0.len());
    for row in &tau0 {
        let mut out = Vec::with_capacity(row.len());
        for &t in row {
            let exact = (t - tau_min) * bandwidth_hz;
            if exact < -1e-9 {
                return Err(Error::InvalidArgument(format!("negative relative delay {exact}")));
            }
            let r = exact.round();
            residual = residual.max((exact - r).abs());
            out.push(r as usize);
        }
        eta.push(out);
    }
    Ok(GeometryDelays { eta, tau_min, tau0, residual })
}

/// Scene file contents; exactly one of `eta` and `geometry` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub num_tx: usize,
    pub num_rx: usize,
    pub range_cells: usize,
    pub eta_max: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Relative delays `eta[rx][tx]` in samples.
    #[serde(default)]
    pub eta: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub geometry: Option<Geometry>,
    pub target_cells: Vec<usize>,
    pub sigma_d2: f64,
    pub sigma_n2: f64,
    /// Slant range of the nearest cell; sets `tau_min = 2 R0 / c` for
    /// explicit delays.
    #[serde(default = "default_range0")]
    pub range_cell_0_m: f64,
}

fn default_range0() -> f64 {
    10_000.0
}

/// A validated scene with all delays resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub num_tx: usize,
    pub num_rx: usize,
    pub range_cells: usize,
    pub eta_max: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub eta: Vec<Vec<usize>>,
    pub tau0: Vec<Vec<f64>>,
    pub tau_min: f64,
    pub delay_residual: f64,
    pub target_cells: Vec<usize>,
    pub sigma_d2: f64,
    pub sigma_n2: f64,
}

impl SceneConfig {
    pub fn resolve(&self) -> Result<Scene> {
        if self.num_tx == 0 || self.num_rx == 0 {
            return invalid("scene needs at least one transmitter and one receiver");
        }
        if !(self.bandwidth_hz > 0.0) || !self.carrier_hz.is_finite() {
            return invalid("bandwidth must be positive and carrier finite");
        }
        let (eta, tau0, tau_min, residual) = match (&self.eta, &self.geometry) {
            (Some(eta), None) => {
                let tau_min = 2.0 * self.range_cell_0_m / SPEED_OF_LIGHT;
                let tau0 = eta
                    .iter()
                    .map(|row| row.iter().map(|&e| tau_min + e as f64 / self.bandwidth_hz).collect())
                    .collect();
                (eta.clone(), tau0, tau_min, 0.0)
            }
            (None, Some(g)) => {
                let d = delays_from_geometry(g, self.bandwidth_hz)?;
                (d.eta, d.tau0, d.tau_min, d.residual)
            }
            _ => return invalid("scene must give exactly one of `eta` or `geometry`"),
        };
        Scene::new(
            self.num_tx,
            self.num_rx,
            self.range_cells,
            self.eta_max,
            self.carrier_hz,
            self.bandwidth_hz,
            eta,
            tau0,
            tau_min,
            residual,
            self.target_cells.clone(),
            self.sigma_d2,
            self.sigma_n2,
        )
    }
}

impl Scene {
    #[allow(clippy::too_many_arguments)]
    fn new(
        num_tx: usize,
        num_rx: usize,
        range_cells: usize,
        eta_max: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
        eta: Vec<Vec<usize>>,
        tau0: Vec<Vec<f64>>,
        tau_min: f64,
        delay_residual: f64,
        target_cells: Vec<usize>,
        sigma_d2: f64,
        sigma_n2: f64,
    ) -> Result<Self> {
        if eta.len() != num_rx || eta.iter().any(|r| r.len() != num_tx) {
            return invalid(format!("delay matrix must be {num_rx} x {num_tx} (rx x tx)"));
        }
        if let Some(bad) = eta.iter().flatten().find(|&&e| e > eta_max) {
            return invalid(format!("delay {bad} exceeds eta_max = {eta_max}"));
        }
        if range_cells == 0 {
            return invalid("range cell count must be at least 1");
        }
        if let Some(bad) = target_cells.iter().find(|&&c| c >= range_cells) {
            return invalid(format!("target cell {bad} outside [0, {range_cells})"));
        }
        if !(sigma_d2 >= 0.0) || !(sigma_n2 >= 0.0) {
            return invalid("variances must be non-negative");
        }
        Ok(Self {
            num_tx,
            num_rx,
            range_cells,
            eta_max,
            carrier_hz,
            bandwidth_hz,
            eta,
            tau0,
            tau_min,
            delay_residual,
            target_cells,
            sigma_d2,
            sigma_n2,
        })
    }

    /// Explicit-delay scene with `tau_min = 2 * range_cell_0_m / c`.
    #[allow(clippy::too_many_arguments)]
    pub fn explicit(
        eta: Vec<Vec<usize>>,
        range_cells: usize,
        eta_max: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
        target_cells: Vec<usize>,
        sigma_d2: f64,
        sigma_n2: f64,
    ) -> Result<Self> {
        SceneConfig {
            num_tx: eta.first().map_or(0, |r| r.len()),
            num_rx: eta.len(),
            range_cells,
            eta_max,
            carrier_hz,
            bandwidth_hz,
            eta: Some(eta),
            geometry: None,
            target_cells,
            sigma_d2,
            sigma_n2,
            range_cell_0_m: default_range0(),
        }
        .resolve()
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Round-trip delay through cell `m`: `tau0[rx][tx] + m T_s`.
    pub fn tau_sum(&self, rx: usize, tx: usize, cell: usize) -> f64 {
        self.tau0[rx][tx] + cell as f64 * self.sample_period()
    }

    pub fn check_layout(&self, layout: Layout) -> Result<()> {
        if layout.range_cells != self.range_cells || layout.eta_max != self.eta_max {
            return invalid(format!(
                "scene (M = {}, eta_max = {}) does not match waveform layout (M = {}, eta_max = {})",
                self.range_cells, self.eta_max, layout.range_cells, layout.eta_max
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcsRealization {
    pub g: Cube<C64>,
    /// `g` with the carrier phase `exp(-j 2 pi f_c tau_sum)` applied.
    pub d: Cube<C64>,
    pub tau_sum: Cube<f64>,
}

/// `exp(-j 2 pi f_c tau)` with the cycle count reduced before the trig call.
pub fn carrier_phase(carrier_hz: f64, tau: f64) -> C64 {
    let cycles = (carrier_hz * tau).fract();
    C64::from_polar(1.0, -std::f64::consts::TAU * cycles)
}

impl RcsRealization {
    /// Attaches the scene's carrier phases to given RCS coefficients.
    pub fn from_g(scene: &Scene, g: Cube<C64>) -> Result<Self> {
        if (g.num_rx(), g.num_tx(), g.cells()) != (scene.num_rx, scene.num_tx, scene.range_cells) {
            return invalid("RCS cube shape does not match the scene");
        }
        let tau_sum = Cube::from_fn(scene.num_rx, scene.num_tx, scene.range_cells, |b, a, m| scene.tau_sum(b, a, m));
        let d = Cube::from_fn(scene.num_rx, scene.num_tx, scene.range_cells, |b, a, m| {
            let v = g.get(b, a, m);
            if v == C64::new(0.0, 0.0) {
                v
            } else {
                v * carrier_phase(scene.carrier_hz, tau_sum.get(b, a, m))
            }
        });
        Ok(Self { g, d, tau_sum })
    }
}

pub(crate) fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Draws `g ~ CN(0, sigma_d2)` on the target cells, zero elsewhere.
pub fn sample_rcs(scene: &Scene, seed: u64) -> RcsRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Cube::zeros(scene.num_rx, scene.num_tx, scene.range_cells);
    for b in 0..scene.num_rx {
        for a in 0..scene.num_tx {
            for &m in &scene.target_cells {
                g.set(b, a, m, complex_normal(&mut rng, scene.sigma_d2));
            }
        }
    }
    RcsRealization::from_g(scene, g).expect("shape follows the scene")
}

/// `count` distinct cells out of `range_cells`, sorted.
pub fn random_targets(range_cells: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > range_cells {
        return invalid(format!("cannot place {count} targets in {range_cells} cells"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = rand::seq::index::sample(&mut rng, range_cells, count).into_vec();
    cells.sort_unstable();
    Ok(cells)
}

/// One pulse with its cyclic extension: `s[i mod N]` for `i < N + cp_len`.
pub fn transmitted_sequence(time: &[C64], layout: Layout) -> ComplexSeq {
    let n = time.len();
    (0..layout.pulse_len()).map(|i| time[i % n]).collect()
}

/// Direct evaluation of the superposition for one receiver:
/// `out[i] = sum_a sum_m d[a][m] tx[a][i - m - eta[a]]`.
pub fn channel_output(tx: &[&[C64]], d: &[&[C64]], eta: &[usize], out_len: usize) -> ComplexSeq {
    let mut out = vec![C64::new(0.0, 0.0); out_len];
    for ((s, dm), &e) in tx.iter().zip(d).zip(eta) {
        for (m, &coef) in dm.iter().enumerate() {
            if coef == C64::new(0.0, 0.0) {
                continue;
            }
            let shift = m + e;
            for (j, &v) in s.iter().enumerate() {
                if let Some(o) = out.get_mut(j + shift) {
                    *o += coef * v;
                }
            }
        }
    }
    out
}

/// Adds `CN(0, sigma_n2)` noise from an independent stream of `seed`.
pub fn add_noise(samples: &mut [C64], sigma_n2: f64, seed: u64, stream: u64) {
    if sigma_n2 == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for v in samples.iter_mut() {
        *v += complex_normal(&mut rng, sigma_n2);
    }
}

/// Received streams for every receiver and pulse of a CPI.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub num_rx: usize,
    pub num_pulses: usize,
    /// Indexed `[rx * num_pulses + pulse]`.
    pub streams: Vec<ComplexSeq>,
    pub noise_seed: Option<u64>,
}

impl ReceivedFrame {
    pub fn stream(&self, rx: usize, pulse: usize) -> &[C64] {
        &self.streams[rx * self.num_pulses + pulse]
    }

    /// Copy with fresh noise; stream `rx * P + pulse` of `seed` per stream.
    pub fn with_noise(&self, sigma_n2: f64, seed: u64) -> Self {
        let mut out = self.clone();
        for (i, s) in out.streams.iter_mut().enumerate() {
            add_noise(s, sigma_n2, seed, i as u64);
        }
        out.noise_seed = Some(seed);
        out
    }

    /// CSV rows `rx,pulse,i,re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rx", "pulse", "i", "re", "im"]).map_err(crate::waveform::csv_err)?;
        for b in 0..self.num_rx {
            for p in 0..self.num_pulses {
                for (i, v) in self.stream(b, p).iter().enumerate() {
                    out.write_record(&[
                        b.to_string(),
                        p.to_string(),
                        i.to_string(),
                        format!("{:e}", v.re),
                        format!("{:e}", v.im),
                    ])
                    .map_err(crate::waveform::csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_dims(ws: &WaveformSet, rcs: &RcsRealization, scene: &Scene) -> Result<()> {
    scene.check_layout(ws.layout())?;
    if ws.num_tx() != scene.num_tx {
        return invalid(format!(
            "waveform set has {} transmitters, scene has {}",
            ws.num_tx(),
            scene.num_tx
        ));
    }
    if (rcs.d.num_rx(), rcs.d.num_tx(), rcs.d.cells()) != (scene.num_rx, scene.num_tx, scene.range_cells) {
        return invalid("RCS realization does not match the scene");
    }
    Ok(())
}

/// Per-receiver received streams for pulse `pulse`, noise from
/// `noise_seed` (stream `rx * P + pulse`) when given.
pub fn synthesize_pulse(
    ws: &WaveformSet,
    rcs: &RcsRealization,
    scene: &Scene,
    pulse: usize,
    noise_seed: Option<u64>,
) -> Result<Vec<ComplexSeq>> {
    check_dims(ws, rcs, scene)?;
    if pulse >= ws.num_pulses() {
        return invalid(format!("pulse {pulse} out of range"));
    }
    let layout = ws.layout();
    let tx: Vec<ComplexSeq> = (0..ws.num_tx())
        .map(|a| transmitted_sequence(ws.time(a, pulse), layout))
        .collect();
    let tx_refs: Vec<&[C64]> = tx.iter().map(|s| s.as_slice()).collect();
    Ok((0..scene.num_rx)
        .map(|b| {
            let d: Vec<&[C64]> = (0..scene.num_tx).map(|a| rcs.d.pair(b, a)).collect();
            let mut out = channel_output(&tx_refs, &d, &scene.eta[b], layout.frame_len());
            if let Some(seed) = noise_seed {
                add_noise(&mut out, scene.sigma_n2, seed, (b * ws.num_pulses() + pulse) as u64);
            }
            out
        })
        .collect())
}

/// All receivers and pulses of one CPI.
pub fn synthesize_received(
    ws: &WaveformSet,
    rcs: &RcsRealization,
    scene: &Scene,
    noise_seed: Option<u64>,
) -> Result<ReceivedFrame> {
    let per_pulse = (0..ws.num_pulses())
        .map(|p| synthesize_pulse(ws, rcs, scene, p, noise_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut streams = Vec::with_capacity(scene.num_rx * ws.num_pulses());
    for b in 0..scene.num_rx {
        for pulse in &per_pulse {
            streams.push(pulse[b].clone());
        }
    }
    Ok(ReceivedFrame {
        num_rx: scene.num_rx,
        num_pulses: ws.num_pulses(),
        streams,
        noise_seed,
    })
}
