//! Matched-filter comparison systems: a shared-band polyphase code set and
//! frequency-division LFM where every transmitter owns its own band.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::cube::Cube;
use crate::dsp::{ComplexSeq, C64};
use crate::error::{invalid, Error, Result};
use crate::reconstruct::{cube_mse, phase_compensate};
use crate::scene::{add_noise, channel_output, RcsRealization, ReceivedFrame, Scene};

const UNIT_TOL: f64 = 1e-12;

/// Unit-modulus chip sequences, one per transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSet {
    pub label: String,
    chips: Vec<ComplexSeq>,
}

impl CodeSet {
    pub fn new(label: impl Into<String>, chips: Vec<ComplexSeq>) -> Result<Self> {
        let Some(len) = chips.first().map(|c| c.len()) else {
            return invalid("code set is empty");
        };
        if len == 0 {
            return invalid("codes must have at least one chip");
        }
        for (a, c) in chips.iter().enumerate() {
            if c.len() != len {
                return invalid(format!("code {a} has length {}, expected {len}", c.len()));
            }
            if let Some(i) = c.iter().position(|v| (v.norm() - 1.0).abs() > UNIT_TOL) {
                return invalid(format!("chip {i} of code {a} is not unit modulus"));
            }
        }
        Ok(Self { label: label.into(), chips })
    }

    pub fn from_phases(label: impl Into<String>, phases: &[Vec<f64>]) -> Result<Self> {
        let chips = phases.iter().map(|row| row.iter().map(|&ph| C64::from_polar(1.0, ph)).collect()).collect();
        Self::new(label, chips)
    }

    pub fn num_tx(&self) -> usize {
        self.chips.len()
    }

    pub fn code_len(&self) -> usize {
        self.chips[0].len()
    }

    pub fn code(&self, tx: usize) -> &[C64] {
        &self.chips[tx]
    }

    pub fn phases(&self) -> Vec<Vec<f64>> {
        self.chips.iter().map(|c| c.iter().map(|v| v.arg()).collect()).collect()
    }

    /// One row of comma-separated phases (radians) per transmitter.
    pub fn write_phases<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.phases() {
            let line: Vec<String> = row.iter().map(|p| format!("{p:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Parses a phase file: one row of radians per transmitter, `#` comments
/// and blank lines ignored.
pub fn read_code_set<R: BufRead>(r: R, label: &str) -> Result<CodeSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let row = body
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format(format!("line {}: bad phase `{f}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: {} phases, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("code set file has no rows".into()));
    }
    CodeSet::from_phases(label, &rows)
}

pub fn load_code_set(path: &Path) -> Result<CodeSet> {
    let f = std::fs::File::open(path)?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_code_set(std::io::BufReader::new(f), &label)
}

/// Root `u` of the `index`-th generalized P4 code: 1, -1, 3, -3, ...
fn p4_root(index: usize) -> f64 {
    let mag = (2 * (index / 2) + 1) as f64;
    if index % 2 == 0 {
        mag
    } else {
        -mag
    }
}

/// Generalized P4 codes `phi_n = pi u n (n - L) / L` with distinct roots
/// `u = 1, -1, 3, -3, ...` per transmitter (`u = 1` is the classic P4).
pub fn p4_code_set(num_tx: usize, len: usize) -> Result<CodeSet> {
    if num_tx == 0 || len == 0 {
        return invalid("P4 set needs at least one code of at least one chip");
    }
    let l = len as f64;
    let phases: Vec<Vec<f64>> = (0..num_tx)
        .map(|a| {
            let u = p4_root(a);
            (0..len)
                .map(|n| {
                    let n = n as f64;
                    std::f64::consts::PI * u * n * (n - l) / l
                })
                .collect()
        })
        .collect();
    CodeSet::from_phases(format!("p4-{num_tx}x{len}"), &phases)
}

/// Unit-energy chirp `exp(j pi kappa n^2 / len) / sqrt(len)`.
pub fn lfm_pulse(len: usize, kappa: f64) -> Result<ComplexSeq> {
    if len < 2 {
        return invalid("LFM pulse needs at least two samples");
    }
    if !kappa.is_finite() {
        return invalid("sweep must be finite");
    }
    let a = 1.0 / (len as f64).sqrt();
    Ok((0..len)
        .map(|n| C64::from_polar(a, std::f64::consts::PI * kappa * (n * n) as f64 / len as f64))
        .collect())
}

/// Aperiodic autocorrelation `r[l] = sum_n x[n + l] x*[n]` for lags
/// `-(len - 1) ..= len - 1`, lag zero at index `len - 1`.
pub fn autocorrelation(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..2 * n.max(1) - 1)
        .map(|idx| {
            let lag = idx as isize - (n as isize - 1);
            (0..n)
                .filter_map(|i| {
                    let j = i as isize + lag;
                    (0..n as isize).contains(&j).then(|| x[j as usize] * x[i].conj())
                })
                .sum()
        })
        .collect()
}

/// Mainlobe-to-largest-sidelobe ratio in dB. The mainlobe is lag 0 and its
/// neighbours down to the first local minimum of `|r|`.
pub fn peak_sidelobe_db(x: &[C64]) -> f64 {
    let r: Vec<f64> = autocorrelation(x).iter().map(|v| v.norm()).collect();
    let n = x.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let right = &r[n - 1..];
    let mut edge = 1;
    while edge + 1 < right.len() && right[edge + 1] < right[edge] {
        edge += 1;
    }
    let side = right[edge..].iter().cloned().fold(0.0, f64::max);
    if side == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (right[0] / side).log10()
    }
}

/// Per-pair amplitude estimates by matched filtering and coherent
/// integration over the pulses, normalized so a lone target seen through an
/// impulsive autocorrelation returns its own amplitude.
///
/// `frame` streams are indexed `[rx * P + pulse]`; `refs[tx]` is the pulse
/// transmitter `tx` sends on every pulse; `eta[rx][tx]` the pair delay.
pub fn matched_filter_range(frame: &ReceivedFrame, refs: &[ComplexSeq], eta: &[Vec<usize>], cells: usize) -> Result<Cube<C64>> {
    if eta.len() != frame.num_rx || eta.iter().any(|r| r.len() != refs.len()) {
        return invalid("delay matrix does not match receivers and references");
    }
    if refs.iter().any(|r| r.is_empty()) || cells == 0 {
        return invalid("references and cell count must be non-empty");
    }
    let mut out = Cube::zeros(frame.num_rx, refs.len(), cells);
    for b in 0..frame.num_rx {
        for (a, s) in refs.iter().enumerate() {
            let gain = frame.num_pulses as f64 * s.iter().map(|v| v.norm_sqr()).sum::<f64>();
            if gain == 0.0 {
                return invalid(format!("reference {a} has zero energy"));
            }
            for m in 0..cells {
                let lag = eta[b][a] + m;
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..frame.num_pulses {
                    let u = frame.stream(b, p);
                    if lag + s.len() > u.len() {
                        return invalid("received stream shorter than delayed reference");
                    }
                    acc += u[lag..lag + s.len()].iter().zip(s).map(|(x, y)| x * y.conj()).sum::<C64>();
                }
                out.set(b, a, m, acc / gain);
            }
        }
    }
    Ok(out)
}

/// Amplitude and phase-compensated estimates from a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub d_hat: Cube<C64>,
    pub g_hat: Cube<C64>,
}

impl BaselineEstimate {
    fn from_d(d_hat: Cube<C64>, scene: &Scene) -> Self {
        let mut g_hat = d_hat.clone();
        for b in 0..scene.num_rx {
            for a in 0..scene.num_tx {
                let tau: Vec<f64> = (0..scene.range_cells).map(|m| scene.tau_sum(b, a, m)).collect();
                // gain already normalized, so no sqrt(N) factor
                let g = phase_compensate(d_hat.pair(b, a), &tau, scene.carrier_hz, 1);
                g_hat.pair_mut(b, a).copy_from_slice(&g);
            }
        }
        Self { d_hat, g_hat }
    }

    pub fn mse(&self, g: &Cube<C64>) -> f64 {
        cube_mse(&self.g_hat, g)
    }
}

fn scaled(code: &[C64], energy: f64) -> ComplexSeq {
    let e: f64 = code.iter().map(|v| v.norm_sqr()).sum();
    let k = (energy / e).sqrt();
    code.iter().map(|v| v * k).collect()
}

fn check_scene(scene: &Scene, rcs: &RcsRealization, num_tx: usize, num_pulses: usize) -> Result<()> {
    if num_tx != scene.num_tx {
        return invalid(format!("{num_tx} baseline waveforms for {} transmitters", scene.num_tx));
    }
    if num_pulses == 0 {
        return invalid("at least one pulse is required");
    }
    if (rcs.d.num_rx(), rcs.d.num_tx(), rcs.d.cells()) != (scene.num_rx, scene.num_tx, scene.range_cells) {
        return invalid("RCS realization does not match the scene");
    }
    Ok(())
}

/// All transmitters share the band, each sending its code on every pulse
/// with energy `1/(T P)`. Noise stream `rx * P + pulse` of `noise_seed`.
pub fn pcode_simulate(
    scene: &Scene,
    rcs: &RcsRealization,
    codes: &CodeSet,
    num_pulses: usize,
    noise_seed: Option<u64>,
) -> Result<BaselineEstimate> {
    check_scene(scene, rcs, codes.num_tx(), num_pulses)?;
    let energy = 1.0 / (scene.num_tx * num_pulses) as f64;
    let refs: Vec<ComplexSeq> = (0..codes.num_tx()).map(|a| scaled(codes.code(a), energy)).collect();
    let refs_slices: Vec<&[C64]> = refs.iter().map(|r| r.as_slice()).collect();
    let len = codes.code_len() + scene.eta_max + scene.range_cells - 1;
    let mut streams = Vec::with_capacity(scene.num_rx * num_pulses);
    for b in 0..scene.num_rx {
        let d: Vec<&[C64]> = (0..scene.num_tx).map(|a| rcs.d.pair(b, a)).collect();
        let clean = channel_output(&refs_slices, &d, &scene.eta[b], len);
        for p in 0..num_pulses {
            let mut s = clean.clone();
            if let Some(seed) = noise_seed {
                add_noise(&mut s, scene.sigma_n2, seed, (b * num_pulses + p) as u64);
            }
            streams.push(s);
        }
    }
    let frame = ReceivedFrame { num_rx: scene.num_rx, num_pulses, streams, noise_seed };
    let d_hat = matched_filter_range(&frame, &refs, &scene.eta, scene.range_cells)?;
    Ok(BaselineEstimate::from_d(d_hat, scene))
}

/// Frequency division with ideal band separation: each transmitter is a
/// separate single-transmitter channel carrying the same chirp, at `T` times
/// the bandwidth of the shared-band systems. Noise stream
/// `(tx * R + rx) * P + pulse` of `noise_seed`.
pub fn fd_lfm_simulate(
    scene: &Scene,
    rcs: &RcsRealization,
    pulse_len: usize,
    kappa: f64,
    num_pulses: usize,
    noise_seed: Option<u64>,
) -> Result<BaselineEstimate> {
    check_scene(scene, rcs, scene.num_tx, num_pulses)?;
    let energy = 1.0 / (scene.num_tx * num_pulses) as f64;
    let chirp = scaled(&lfm_pulse(pulse_len, kappa)?, energy);
    let len = pulse_len + scene.eta_max + scene.range_cells - 1;
    let mut d_hat = Cube::zeros(scene.num_rx, scene.num_tx, scene.range_cells);
    for a in 0..scene.num_tx {
        let mut streams = Vec::with_capacity(scene.num_rx * num_pulses);
        for b in 0..scene.num_rx {
            let clean = channel_output(&[&chirp], &[rcs.d.pair(b, a)], &[scene.eta[b][a]], len);
            for p in 0..num_pulses {
                let mut s = clean.clone();
                if let Some(seed) = noise_seed {
                    add_noise(&mut s, scene.sigma_n2, seed, ((a * scene.num_rx + b) * num_pulses + p) as u64);
                }
                streams.push(s);
            }
        }
        let frame = ReceivedFrame { num_rx: scene.num_rx, num_pulses, streams, noise_seed };
        let eta: Vec<Vec<usize>> = scene.eta.iter().map(|row| vec![row[a]]).collect();
        let est = matched_filter_range(&frame, std::slice::from_ref(&chirp), &eta, scene.range_cells)?;
        for b in 0..scene.num_rx {
            d_hat.pair_mut(b, a).copy_from_slice(est.pair(b, 0));
        }
    }
    Ok(BaselineEstimate::from_d(d_hat, scene))
}
