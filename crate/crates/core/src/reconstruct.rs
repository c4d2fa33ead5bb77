//! Receive chain: trim, demodulate, separate transmitters per subcarrier,
//! compress by IDFT, undo the cyclic offset and strip the carrier phase.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cod::verify_flat_unitary;
use crate::cube::Cube;
use crate::dsp::{cyclic_shift, dft_unitary, idft_unitary, ComplexSeq, ShiftDirection, C64};
use crate::error::{invalid, Error, Result};
use crate::layout::Layout;
use crate::scene::{carrier_phase, ReceivedFrame, Scene};
use crate::waveform::WaveformSet;

/// Smallest accepted ratio of extreme singular values of `S_k`.
pub const RANK_TOL: f64 = 1e-10;

/// Drops the `cp_len` leading and trailing samples and takes the unitary DFT
/// of the remaining `N`.
pub fn trim_and_demodulate(stream: &[C64], layout: Layout) -> Result<ComplexSeq> {
    if stream.len() != layout.frame_len() {
        return invalid(format!(
            "received stream has {} samples, expected {}",
            stream.len(),
            layout.frame_len()
        ));
    }
    let c = layout.cp_len();
    dft_unitary(&stream[c..c + layout.subcarriers])
}

/// `U_k`, one `num_rx x num_pulses` matrix per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierObservations {
    pub u: Vec<DMatrix<C64>>,
}

impl SubcarrierObservations {
    pub fn from_frame(frame: &ReceivedFrame, layout: Layout) -> Result<Self> {
        let spectra = frame
            .streams
            .par_iter()
            .map(|s| trim_and_demodulate(s, layout))
            .collect::<Result<Vec<_>>>()?;
        let u = (0..layout.subcarriers)
            .map(|k| DMatrix::from_fn(frame.num_rx, frame.num_pulses, |b, p| spectra[b * frame.num_pulses + p][k]))
            .collect();
        Ok(Self { u })
    }

    pub fn subcarriers(&self) -> usize {
        self.u.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationPath {
    /// `S_k^+ = S_k^H (S_k S_k^H)^-1` from an SVD.
    General,
    /// `S_k^H / c_k`, valid when `S_k S_k^H = c_k I`.
    FlatUnitary,
}

/// Precomputed right inverses of every `S_k`.
#[derive(Debug, Clone)]
pub struct Separator {
    path: SeparationPath,
    inverses: Vec<DMatrix<C64>>,
}

fn rank_check(k: usize, s: &DMatrix<C64>) -> Result<nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn>> {
    let svd = s.clone().svd(true, true);
    let max = svd.singular_values.max();
    let rows = s.nrows();
    // Full row rank needs `rows` non-negligible singular values.
    let ratio = if rows > svd.singular_values.len() || max == 0.0 {
        0.0
    } else {
        let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv[rows - 1] / max
    };
    if !(ratio > RANK_TOL) {
        return Err(Error::RankDeficient { subcarrier: k, ratio });
    }
    Ok(svd)
}

impl Separator {
    /// Flat-unitary fast path when the set qualifies, otherwise the general one.
    pub fn new(ws: &WaveformSet) -> Result<Self> {
        let scale = (0..ws.num_tx())
            .flat_map(|a| ws.power_profile(a))
            .fold(0.0, f64::max);
        if scale > 0.0 && verify_flat_unitary(ws) <= RANK_TOL * scale {
            Self::flat_unitary(ws)
        } else {
            Self::general(ws)
        }
    }

    pub fn general(ws: &WaveformSet) -> Result<Self> {
        let inverses = (0..ws.subcarriers())
            .into_par_iter()
            .map(|k| {
                let s = ws.subcarrier_matrix(k);
                let svd = rank_check(k, &s)?;
                svd.pseudo_inverse(0.0).map_err(|e| Error::InvalidArgument(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { path: SeparationPath::General, inverses })
    }

    pub fn flat_unitary(ws: &WaveformSet) -> Result<Self> {
        let scale = (0..ws.num_tx()).flat_map(|a| ws.power_profile(a)).fold(0.0, f64::max);
        let dev = verify_flat_unitary(ws);
        if !(dev <= RANK_TOL * scale) {
            return invalid(format!("waveform set is not flat-unitary (deviation {dev:.3e})"));
        }
        let inverses = (0..ws.subcarriers())
            .map(|k| {
                let s = ws.subcarrier_matrix(k);
                let c = s.row_iter().map(|r| r.norm_squared()).sum::<f64>() / ws.num_tx() as f64;
                if !(c > RANK_TOL * scale) {
                    return Err(Error::RankDeficient { subcarrier: k, ratio: 0.0 });
                }
                Ok(s.adjoint() / C64::new(c, 0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { path: SeparationPath::FlatUnitary, inverses })
    }

    pub fn path(&self) -> SeparationPath {
        self.path
    }

    /// `D_k = U_k S_k^+` for every subcarrier.
    pub fn apply(&self, obs: &SubcarrierObservations) -> Result<Vec<DMatrix<C64>>> {
        if obs.subcarriers() != self.inverses.len() {
            return invalid("observation and waveform subcarrier counts differ");
        }
        obs.u
            .iter()
            .zip(&self.inverses)
            .map(|(u, inv)| {
                if u.ncols() != inv.nrows() {
                    return invalid(format!("observations have {} pulses, waveforms {}", u.ncols(), inv.nrows()));
                }
                Ok(u * inv)
            })
            .collect()
    }
}

/// Per-subcarrier `num_rx x num_tx` estimates of `D_k`.
pub fn separate_transmitters(obs: &SubcarrierObservations, ws: &WaveformSet) -> Result<Vec<DMatrix<C64>>> {
    Separator::new(ws)?.apply(obs)
}

/// IDFT of one pair's `D_k` sequence, undo the `cp_len - eta` offset, keep
/// the first `M` entries. The result carries the `sqrt(N)` gain.
pub fn recover_rcs(d_pair: &[C64], eta: usize, layout: Layout) -> Result<ComplexSeq> {
    if d_pair.len() != layout.subcarriers {
        return invalid(format!("expected {} subcarriers, got {}", layout.subcarriers, d_pair.len()));
    }
    if eta > layout.eta_max {
        return invalid(format!("delay {eta} exceeds eta_max = {}", layout.eta_max));
    }
    let compressed = idft_unitary(d_pair)?;
    // Entry m of the estimate sits at index m - (cp_len - eta) mod N.
    let mut out = cyclic_shift(&compressed, layout.cp_len() - eta, ShiftDirection::Right);
    out.truncate(layout.range_cells);
    Ok(out)
}

/// `g_hat = d_hat / sqrt(N) * exp(+j 2 pi f_c tau_sum)`.
pub fn phase_compensate(d_hat: &[C64], tau_sum: &[f64], carrier_hz: f64, subcarriers: usize) -> Vec<C64> {
    let gain = 1.0 / (subcarriers as f64).sqrt();
    d_hat
        .iter()
        .zip(tau_sum)
        .map(|(&d, &t)| d * gain * carrier_phase(carrier_hz, t).conj())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeEstimate {
    /// Raw estimates, `sqrt(N) d + w`.
    pub d_hat: Cube<C64>,
    /// Gain-normalized, phase-compensated estimates of `g`.
    pub g_hat: Cube<C64>,
    /// `[rx][tx]` SNR estimate in dB from target versus empty cells; `None`
    /// when either set is empty.
    pub pair_snr_db: Vec<Vec<Option<f64>>>,
}

impl RangeEstimate {
    /// CSV rows `rx,tx,m,re,im,abs` of `g_hat`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_cube_csv(&self.g_hat, w)
    }

    /// Mean `|g_hat - g|^2` over every cell.
    pub fn mse(&self, g: &Cube<C64>) -> f64 {
        cube_mse(&self.g_hat, g)
    }
}

pub fn cube_mse(est: &Cube<C64>, truth: &Cube<C64>) -> f64 {
    assert!(est.same_shape(truth), "cube shapes differ");
    let n = est.as_slice().len().max(1);
    est.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n as f64
}

/// Largest `|est - truth|` relative to the largest `|truth|`.
pub fn max_relative_error(est: &Cube<C64>, truth: &Cube<C64>) -> f64 {
    assert!(est.same_shape(truth), "cube shapes differ");
    let scale = truth.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = est.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub fn write_cube_csv<W: Write>(cube: &Cube<C64>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rx", "tx", "m", "re", "im", "abs"]).map_err(crate::waveform::csv_err)?;
    for b in 0..cube.num_rx() {
        for a in 0..cube.num_tx() {
            for (m, v) in cube.pair(b, a).iter().enumerate() {
                out.write_record(&[
                    b.to_string(),
                    a.to_string(),
                    m.to_string(),
                    format!("{:e}", v.re),
                    format!("{:e}", v.im),
                    format!("{:e}", v.norm()),
                ])
                .map_err(crate::waveform::csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn pair_snr(d_hat: &[C64], targets: &[usize]) -> Option<f64> {
    let mut on = (0.0, 0usize);
    let mut off = (0.0, 0usize);
    for (m, v) in d_hat.iter().enumerate() {
        let slot = if targets.contains(&m) { &mut on } else { &mut off };
        slot.0 += v.norm_sqr();
        slot.1 += 1;
    }
    if on.1 == 0 || off.1 == 0 {
        return None;
    }
    let noise = off.0 / off.1 as f64;
    let signal = (on.0 / on.1 as f64 - noise).max(0.0);
    Some(10.0 * (signal / noise).log10())
}

/// Full chain with a prepared separator; reuse it across noise draws.
pub fn reconstruct_with(
    frame: &ReceivedFrame,
    separator: &Separator,
    ws: &WaveformSet,
    scene: &Scene,
) -> Result<RangeEstimate> {
    let layout = ws.layout();
    scene.check_layout(layout)?;
    if frame.num_rx != scene.num_rx || frame.num_pulses != ws.num_pulses() || ws.num_tx() != scene.num_tx {
        return invalid("frame, waveform set and scene dimensions disagree");
    }
    let obs = SubcarrierObservations::from_frame(frame, layout)?;
    let d_k = separator.apply(&obs)?;
    let (nr, nt, m) = (scene.num_rx, scene.num_tx, scene.range_cells);
    let pairs: Vec<(usize, usize)> = (0..nr).flat_map(|b| (0..nt).map(move |a| (b, a))).collect();
    let recovered = pairs
        .par_iter()
        .map(|&(b, a)| {
            let seq: Vec<C64> = d_k.iter().map(|d| d[(b, a)]).collect();
            recover_rcs(&seq, scene.eta[b][a], layout)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut d_hat = Cube::zeros(nr, nt, m);
    let mut g_hat = Cube::zeros(nr, nt, m);
    let mut pair_snr_db = vec![vec![None; nt]; nr];
    for (&(b, a), d) in pairs.iter().zip(&recovered) {
        d_hat.pair_mut(b, a).copy_from_slice(d);
        let tau: Vec<f64> = (0..m).map(|c| scene.tau_sum(b, a, c)).collect();
        let g = phase_compensate(d, &tau, scene.carrier_hz, layout.subcarriers);
        g_hat.pair_mut(b, a).copy_from_slice(&g);
        pair_snr_db[b][a] = pair_snr(d, &scene.target_cells);
    }
    Ok(RangeEstimate { d_hat, g_hat, pair_snr_db })
}

pub fn reconstruct_all(frame: &ReceivedFrame, ws: &WaveformSet, scene: &Scene) -> Result<RangeEstimate> {
    reconstruct_with(frame, &Separator::new(ws)?, ws, scene)
}

fn check_noise(sigma_n2: f64) -> Result<()> {
    if !(sigma_n2 > 0.0) {
        return invalid("noise variance must be positive");
    }
    Ok(())
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Post-reconstruction SNR of one coefficient seen through transmitter `tx`.
pub fn snr_post_theory_db(d: C64, ws: &WaveformSet, tx: usize, sigma_n2: f64) -> Result<f64> {
    check_noise(sigma_n2)?;
    if tx >= ws.num_tx() {
        return invalid(format!("transmitter {tx} out of range"));
    }
    let n = ws.subcarriers() as f64;
    let harmonic: f64 = ws.power_profile(tx).iter().map(|c| 1.0 / c).sum();
    Ok(db(n * n * d.norm_sqr() / (sigma_n2 * harmonic)))
}

/// Upper bound of the post-reconstruction SNR at per-transmitter energy `1/T`.
pub fn snr_max_theory_db(d: C64, num_tx: usize, sigma_n2: f64) -> Result<f64> {
    check_noise(sigma_n2)?;
    if num_tx == 0 {
        return invalid("num_tx must be positive");
    }
    Ok(db(d.norm_sqr() / (num_tx as f64 * sigma_n2)))
}

/// Per-sample SNR of one coefficient before compression, for pulses of
/// energy `1/(T P0)` spread evenly over `N_t` samples.
pub fn snr_pre_theory_db(d: C64, nonzero_len: usize, num_tx: usize, num_vars: usize, sigma_n2: f64) -> Result<f64> {
    check_noise(sigma_n2)?;
    if nonzero_len == 0 || num_tx == 0 || num_vars == 0 {
        return invalid("N_t, T and P0 must be positive");
    }
    Ok(db(d.norm_sqr() / ((nonzero_len * num_tx * num_vars) as f64 * sigma_n2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cod::{alamouti_design, place_pulses};
    use crate::micf::xi_db;
    use crate::paraunitary::paraunitary_set;
    use crate::scene::{sample_rcs, synthesize_received, RcsRealization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(layout: Layout, t: usize, p: usize, seed: u64) -> WaveformSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let freq = (0..t * p)
            .map(|_| {
                (0..layout.subcarriers)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        WaveformSet::from_freq(layout, t, p, p, freq).unwrap()
    }

    fn alamouti_set(layout: Layout, seed: u64) -> WaveformSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, n) = (layout.cp_len(), layout.subcarriers);
        let base: Vec<ComplexSeq> = (0..2)
            .map(|_| {
                let mut t = vec![C64::new(0.0, 0.0); n];
                for v in &mut t[c..=n - c] {
                    *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                dft_unitary(&t).unwrap()
            })
            .collect();
        place_pulses(&alamouti_design(), layout, &base).unwrap()
    }

    #[test]
    fn trim_lengths() {
        let layout = Layout::new(309, 96, 40).unwrap();
        assert_eq!(layout.frame_len(), 579);
        let out = trim_and_demodulate(&vec![C64::new(0.0, 0.0); 579], layout).unwrap();
        assert_eq!(out.len(), 309);
        assert!(out.iter().all(|v| v.norm() == 0.0));
        assert!(trim_and_demodulate(&vec![C64::new(0.0, 0.0); 578], layout).is_err());
    }

    #[test]
    fn demodulated_spectrum_is_d_times_s() {
        let layout = Layout::new(48, 5, 3).unwrap();
        let ws = random_set(layout, 1, 1, 3);
        let scene = Scene::explicit(vec![vec![0]], 5, 3, 9e9, 150e6, vec![0], 1.0, 0.0).unwrap();
        let rcs = sample_rcs(&scene, 2);
        let frame = synthesize_received(&ws, &rcs, &scene, None).unwrap();
        let u = trim_and_demodulate(frame.stream(0, 0), layout).unwrap();
        let n = layout.subcarriers as f64;
        let c = layout.cp_len() as f64;
        let d0 = rcs.d.get(0, 0, 0);
        for (k, &uk) in u.iter().enumerate() {
            let dk = d0 * C64::from_polar(1.0, std::f64::consts::TAU * k as f64 * c / n);
            assert!((uk - dk * ws.freq(0, 0)[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_separation_divides() {
        let layout = Layout::new(16, 2, 1).unwrap();
        let ws = random_set(layout, 1, 1, 1);
        let u: Vec<DMatrix<C64>> = (0..16).map(|k| DMatrix::from_element(1, 1, ws.freq(0, 0)[k] * 3.0)).collect();
        let d = separate_transmitters(&SubcarrierObservations { u }, &ws).unwrap();
        assert!(d.iter().all(|m| (m[(0, 0)] - C64::new(3.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn fast_and_general_paths_agree() {
        let layout = Layout::new(64, 6, 4).unwrap();
        for seed in 0..4 {
            let ws = alamouti_set(layout, seed);
            let fast = Separator::flat_unitary(&ws).unwrap();
            assert_eq!(Separator::new(&ws).unwrap().path(), SeparationPath::FlatUnitary);
            let general = Separator::general(&ws).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 9);
            let u = (0..64)
                .map(|_| DMatrix::from_fn(3, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .collect();
            let obs = SubcarrierObservations { u };
            let (a, b) = (fast.apply(&obs).unwrap(), general.apply(&obs).unwrap());
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).iter().map(|v| v.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
            let scale = a.iter().map(|x| x.iter().map(|v| v.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "{err}");
        }
    }

    #[test]
    fn zero_waveforms_are_rank_deficient() {
        let layout = Layout::new(16, 2, 1).unwrap();
        let ws = WaveformSet::from_freq(layout, 2, 2, 2, vec![vec![C64::new(0.0, 0.0); 16]; 4]).unwrap();
        assert!(matches!(Separator::new(&ws), Err(Error::RankDeficient { subcarrier: 0, .. })));
        // one empty subcarrier is named
        let mut freq: Vec<ComplexSeq> = (0..4).map(|i| random_set(layout, 1, 1, i).freq(0, 0).to_vec()).collect();
        for f in &mut freq {
            f[5] = C64::new(0.0, 0.0);
        }
        let ws = WaveformSet::from_freq(layout, 2, 2, 2, freq).unwrap();
        assert!(matches!(Separator::general(&ws), Err(Error::RankDeficient { subcarrier: 5, .. })));
    }

    #[test]
    fn zero_input_recovers_zero() {
        let layout = Layout::new(32, 8, 4).unwrap();
        let d = recover_rcs(&vec![C64::new(0.0, 0.0); 32], 2, layout).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.iter().all(|v| v.norm() == 0.0));
        assert!(recover_rcs(&vec![C64::new(0.0, 0.0); 32], 5, layout).is_err());
    }

    #[test]
    fn phase_compensation_examples() {
        let d = vec![C64::new(2.0, 1.0), C64::new(-1.0, 0.5)];
        let g = phase_compensate(&d, &[0.0, 0.0], 9e9, 4);
        assert!((g[0] - d[0] / 2.0).norm() < 1e-15);
        let g = phase_compensate(&d, &[1.3e-5, 2.7e-7], 9.1e9, 4);
        for (a, b) in g.iter().zip(&d) {
            assert!((a.norm() - b.norm() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_exact_for_general_and_paraunitary_sets() {
        let layout = Layout::new(64, 6, 4).unwrap();
        let sets = [random_set(layout, 2, 3, 5), paraunitary_set(layout, 2, 7).unwrap(), alamouti_set(layout, 1)];
        for (i, ws) in sets.iter().enumerate() {
            let scene = Scene::explicit(vec![vec![4, 0], vec![1, 3]], 6, 4, 9e9, 150e6, vec![0, 2, 5], 1.0, 0.0).unwrap();
            let rcs = sample_rcs(&scene, i as u64);
            let frame = synthesize_received(ws, &rcs, &scene, None).unwrap();
            let est = reconstruct_all(&frame, ws, &scene).unwrap();
            assert!(max_relative_error(&est.g_hat, &rcs.g) < 1e-9, "set {i}");
            let sqrt_n = Cube::from_fn(2, 2, 6, |b, a, m| rcs.d.get(b, a, m) * 8.0);
            assert!(max_relative_error(&est.d_hat, &sqrt_n) < 1e-9);
        }
    }

    #[test]
    fn swapping_transmitters_permutes_estimates() {
        let layout = Layout::new(64, 6, 4).unwrap();
        let ws = random_set(layout, 2, 2, 11);
        let swapped = WaveformSet::from_freq(
            layout,
            2,
            2,
            2,
            vec![ws.freq(1, 0).to_vec(), ws.freq(1, 1).to_vec(), ws.freq(0, 0).to_vec(), ws.freq(0, 1).to_vec()],
        )
        .unwrap();
        let scene = Scene::explicit(vec![vec![4, 1]], 6, 4, 9e9, 150e6, vec![1, 3], 1.0, 0.0).unwrap();
        let scene_sw = Scene::explicit(vec![vec![1, 4]], 6, 4, 9e9, 150e6, vec![1, 3], 1.0, 0.0).unwrap();
        let rcs = sample_rcs(&scene, 3);
        let g_sw = Cube::from_fn(1, 2, 6, |b, a, m| rcs.g.get(b, 1 - a, m));
        let rcs_sw = RcsRealization::from_g(&scene_sw, g_sw).unwrap();
        let e1 = reconstruct_all(&synthesize_received(&ws, &rcs, &scene, None).unwrap(), &ws, &scene).unwrap();
        let e2 = reconstruct_all(&synthesize_received(&swapped, &rcs_sw, &scene_sw, None).unwrap(), &swapped, &scene_sw).unwrap();
        for a in 0..2 {
            for m in 0..6 {
                assert!((e1.g_hat.get(0, a, m) - e2.g_hat.get(0, 1 - a, m)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn snr_theory_relations() {
        let layout = Layout::new(302, 96, 40).unwrap();
        let ws = paraunitary_set(layout, 2, 1).unwrap();
        let d = C64::new(0.3, -0.4);
        let post = snr_post_theory_db(d, &ws, 0, 0.01).unwrap();
        let max = snr_max_theory_db(d, 2, 0.01).unwrap();
        assert!((post - max).abs() < 1e-9);
        let pre = snr_pre_theory_db(d, 33, 2, 2, 0.01).unwrap();
        assert!((max - pre - 10.0 * (2.0f64 * 33.0).log10()).abs() < 1e-12);
        assert!(snr_max_theory_db(d, 2, 0.0).is_err());
        assert!(snr_post_theory_db(d, &ws, 0, -1.0).is_err());

        let ws = random_set(Layout::new(40, 4, 2).unwrap(), 2, 2, 8);
        for a in 0..2 {
            // xi is defined per transmitter at energy 1/T
            let e: f64 = ws.power_profile(a).iter().sum();
            let scaled: Vec<ComplexSeq> = (0..2).map(|p| ws.freq(a, p).iter().map(|v| v / (2.0 * e).sqrt()).collect()).collect();
            let single = WaveformSet::from_freq(ws.layout(), 1, 2, 2, scaled.clone()).unwrap();
            let ratio = snr_post_theory_db(d, &single, 0, 0.1).unwrap() - snr_max_theory_db(d, 2, 0.1).unwrap();
            assert!((ratio - xi_db(&scaled, 2)).abs() < 1e-12, "{ratio} {}", xi_db(&scaled, 2));
        }
    }
}
