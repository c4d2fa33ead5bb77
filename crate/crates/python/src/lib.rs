//! Python bindings for the `cpofdm` crate.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use cpofdm::cube::Cube;
use cpofdm::dsp::C64;
use cpofdm::micf::{self, MicfConfig, Thresholds};
use cpofdm::reconstruct::{self, RangeEstimate};
use cpofdm::scene::{self, RcsRealization};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: cpofdm::Error) -> PyErr {
    match e {
        cpofdm::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn nested(cube: &Cube<C64>) -> Vec<Vec<Vec<C64>>> {
    (0..cube.num_rx())
        .map(|b| (0..cube.num_tx()).map(|a| cube.pair(b, a).to_vec()).collect())
        .collect()
}

#[pyclass(name = "Layout", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyLayout(cpofdm::Layout);

#[pymethods]
impl PyLayout {
    #[new]
    fn new(subcarriers: usize, range_cells: usize, eta_max: usize) -> PyResult<Self> {
        cpofdm::Layout::new(subcarriers, range_cells, eta_max).map(Self).map_err(py_err)
    }

    #[getter]
    fn subcarriers(&self) -> usize {
        self.0.subcarriers
    }

    #[getter]
    fn range_cells(&self) -> usize {
        self.0.range_cells
    }

    #[getter]
    fn eta_max(&self) -> usize {
        self.0.eta_max
    }

    #[getter]
    fn cp_len(&self) -> usize {
        self.0.cp_len()
    }

    #[getter]
    fn nonzero_len(&self) -> usize {
        self.0.nonzero_len()
    }

    #[getter]
    fn pulse_len(&self) -> usize {
        self.0.pulse_len()
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.0.frame_len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Layout(subcarriers={}, range_cells={}, eta_max={})",
            self.0.subcarriers, self.0.range_cells, self.0.eta_max
        )
    }
}

#[pyclass(name = "WaveformSet", frozen)]
struct PyWaveformSet(cpofdm::WaveformSet);

#[pymethods]
impl PyWaveformSet {
    /// Frequency weights indexed `[tx * num_pulses + pulse]`.
    #[new]
    #[pyo3(signature = (layout, num_tx, num_pulses, freq, num_vars=None))]
    fn new(
        layout: PyLayout,
        num_tx: usize,
        num_pulses: usize,
        freq: Vec<Vec<C64>>,
        num_vars: Option<usize>,
    ) -> PyResult<Self> {
        let vars = num_vars.unwrap_or(num_pulses);
        cpofdm::WaveformSet::from_freq(layout.0, num_tx, num_pulses, vars, freq)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (layout, num_tx, seed=0))]
    fn paraunitary(layout: PyLayout, num_tx: usize, seed: u64) -> PyResult<Self> {
        cpofdm::paraunitary::paraunitary_set(layout.0, num_tx, seed).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        cpofdm::WaveformSet::read_binary(BufReader::new(f)).map(Self).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.0.write_binary(BufWriter::new(f)).map_err(py_err)
    }

    #[getter]
    fn layout(&self) -> PyLayout {
        PyLayout(self.0.layout())
    }

    #[getter]
    fn num_tx(&self) -> usize {
        self.0.num_tx()
    }

    #[getter]
    fn num_pulses(&self) -> usize {
        self.0.num_pulses()
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.0.num_vars()
    }

    fn freq(&self, tx: usize, pulse: usize) -> PyResult<Vec<C64>> {
        self.check(tx, pulse)?;
        Ok(self.0.freq(tx, pulse).to_vec())
    }

    fn time(&self, tx: usize, pulse: usize) -> PyResult<Vec<C64>> {
        self.check(tx, pulse)?;
        Ok(self.0.time(tx, pulse).to_vec())
    }

    fn power_profile(&self, tx: usize) -> PyResult<Vec<f64>> {
        self.check(tx, 0)?;
        Ok(self.0.power_profile(tx))
    }

    fn zero_violation(&self) -> f64 {
        self.0.zero_violation()
    }

    fn xi_db(&self) -> f64 {
        let pulses: Vec<_> = (0..self.0.num_pulses()).map(|p| self.0.freq(0, p).to_vec()).collect();
        micf::xi_db(&pulses, self.0.num_tx())
    }

    fn __repr__(&self) -> String {
        format!(
            "WaveformSet(num_tx={}, num_pulses={}, subcarriers={})",
            self.0.num_tx(),
            self.0.num_pulses(),
            self.0.subcarriers()
        )
    }
}

impl PyWaveformSet {
    fn check(&self, tx: usize, pulse: usize) -> PyResult<()> {
        if tx >= self.0.num_tx() || pulse >= self.0.num_pulses() {
            return Err(PyValueError::new_err(format!("no pulse ({tx}, {pulse})")));
        }
        Ok(())
    }
}

#[pyclass(name = "Scene", frozen)]
struct PyScene(cpofdm::scene::Scene);

#[pymethods]
impl PyScene {
    /// `eta[rx][tx]` in samples.
    #[new]
    #[pyo3(signature = (eta, range_cells, eta_max, target_cells, sigma_n2, carrier_hz=10e9, bandwidth_hz=100e6, sigma_d2=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        eta: Vec<Vec<usize>>,
        range_cells: usize,
        eta_max: usize,
        target_cells: Vec<usize>,
        sigma_n2: f64,
        carrier_hz: f64,
        bandwidth_hz: f64,
        sigma_d2: f64,
    ) -> PyResult<Self> {
        cpofdm::scene::Scene::explicit(
            eta,
            range_cells,
            eta_max,
            carrier_hz,
            bandwidth_hz,
            target_cells,
            sigma_d2,
            sigma_n2,
        )
        .map(Self)
        .map_err(py_err)
    }

    #[getter]
    fn eta(&self) -> Vec<Vec<usize>> {
        self.0.eta.clone()
    }

    #[getter]
    fn num_tx(&self) -> usize {
        self.0.num_tx
    }

    #[getter]
    fn num_rx(&self) -> usize {
        self.0.num_rx
    }

    #[getter]
    fn sigma_n2(&self) -> f64 {
        self.0.sigma_n2
    }
}

/// Runs the MICF design; returns `(WaveformSet, report dict)`.
#[pyfunction]
#[pyo3(signature = (subcarriers=309, range_cells=96, eta_max=40, num_tx=2, num_pulses=2, iterations=8, papr_target_db=0.1, freq_clip=0.1, oversampling=4, seed=0))]
#[allow(clippy::too_many_arguments)]
fn design_micf<'py>(
    py: Python<'py>,
    subcarriers: usize,
    range_cells: usize,
    eta_max: usize,
    num_tx: usize,
    num_pulses: usize,
    iterations: usize,
    papr_target_db: f64,
    freq_clip: f64,
    oversampling: usize,
    seed: u64,
) -> PyResult<(PyWaveformSet, Bound<'py, PyDict>)> {
    let cfg = MicfConfig {
        subcarriers,
        range_cells,
        eta_max,
        num_tx,
        num_pulses,
        iterations,
        papr_target_db,
        freq_clip,
        oversampling,
        seed,
    };
    let (res, ws) = py.detach(|| micf::micf_waveform_set(&cfg)).map_err(py_err)?;
    let report = PyDict::new(py);
    report.set_item("xi_db", res.xi_db)?;
    report.set_item("mean_papr_db", res.mean_papr_db)?;
    report.set_item("per_pulse_papr_db", res.per_pulse_papr_db)?;
    report.set_item("iterations_run", res.iterations_run)?;
    Ok((PyWaveformSet(ws), report))
}

/// SNR degradation factor in dB of one transmitter's pulse weights.
#[pyfunction]
fn xi_db(pulses: Vec<Vec<C64>>, num_tx: usize) -> f64 {
    micf::xi_db(&pulses, num_tx)
}

/// Counts MICF trials meeting both thresholds.
#[pyfunction]
#[pyo3(signature = (num_pulses, trials, xi_min_db=-0.08, papr_max_db=2.2, seed=0))]
fn micf_qualifying(py: Python<'_>, num_pulses: usize, trials: usize, xi_min_db: f64, papr_max_db: f64, seed: u64) -> PyResult<usize> {
    let cfg = MicfConfig {
        num_pulses,
        seed,
        ..MicfConfig::set_a()
    };
    let th = Thresholds { xi_min_db, papr_max_db };
    py.detach(|| micf::monte_carlo_cdf(&cfg, trials, th))
        .map(|s| s.qualifying)
        .map_err(py_err)
}

/// One coherent interval: random RCS from `rcs_seed`, noise from
/// `noise_seed` (noiseless when `None`), then full reconstruction.
#[pyfunction]
#[pyo3(signature = (ws, scene, rcs_seed=0, noise_seed=None))]
fn simulate<'py>(
    py: Python<'py>,
    ws: &PyWaveformSet,
    scene: &PyScene,
    rcs_seed: u64,
    noise_seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let (rcs, est) = py
        .detach(|| -> cpofdm::Result<(RcsRealization, RangeEstimate)> {
            let rcs = scene::sample_rcs(&scene.0, rcs_seed);
            let frame = scene::synthesize_received(&ws.0, &rcs, &scene.0, noise_seed)?;
            let est = reconstruct::reconstruct_all(&frame, &ws.0, &scene.0)?;
            Ok((rcs, est))
        })
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("mse", est.mse(&rcs.g))?;
    out.set_item("g_true", nested(&rcs.g))?;
    out.set_item("g_hat", nested(&est.g_hat))?;
    out.set_item("pair_snr_db", est.pair_snr_db.clone())?;
    Ok(out)
}

/// Post-processing SNR in dB predicted for transmitter `tx`.
#[pyfunction]
#[pyo3(signature = (ws, tx, sigma_n2, d=C64::new(1.0, 0.0)))]
fn snr_post_theory_db(ws: &PyWaveformSet, tx: usize, sigma_n2: f64, d: C64) -> PyResult<f64> {
    reconstruct::snr_post_theory_db(d, &ws.0, tx, sigma_n2).map_err(py_err)
}

#[pymodule]
fn cpofdm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLayout>()?;
    m.add_class::<PyWaveformSet>()?;
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(design_micf, m)?)?;
    m.add_function(wrap_pyfunction!(xi_db, m)?)?;
    m.add_function(wrap_pyfunction!(micf_qualifying, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(snr_post_theory_db, m)?)?;
    Ok(())
}
