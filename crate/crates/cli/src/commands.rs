use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use cpofdm::baselines::{fd_lfm_simulate, load_code_set, p4_code_set, pcode_simulate, BaselineEstimate, CodeSet};
use cpofdm::cod::{alamouti_design, cod4_design, design_for, place_blocks, verify_cod, verify_flat_unitary};
use cpofdm::cube::Cube;
use cpofdm::dsp::{dft_unitary, papr_db, C64};
use cpofdm::micf::{micf_waveform_set, monte_carlo_cdf, xi_db, MicfConfig, Thresholds};
use cpofdm::paraunitary::paraunitary_pulses;
use cpofdm::reconstruct::{max_relative_error, reconstruct_with, write_cube_csv, RangeEstimate, Separator};
use cpofdm::scene::{sample_rcs, synthesize_received, Scene};
use cpofdm::{Layout, WaveformSet};

use crate::config::{Baseline, DesignSection, Method, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
        }
    }
}

fn cfg_err(e: impl fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: impl fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

pub struct Options {
    pub seed: u64,
    pub trials: Option<usize>,
}

/// Files are buffered and only written once the command has finished.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    failure: Option<String>,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(run_err)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn write(self, dir: &Path) -> Result<(), Failure> {
        std::fs::create_dir_all(dir).map_err(|e| run_err(format!("cannot create {}: {e}", dir.display())))?;
        for (name, bytes) in &self.files {
            let path: PathBuf = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| run_err(format!("cannot write {}: {e}", path.display())))?;
        }
        match self.failure {
            Some(m) => Err(Failure::Runtime(m)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct DesignReport {
    method: &'static str,
    seed: u64,
    search_trials: Option<usize>,
    search_qualifying: Option<usize>,
    num_tx: usize,
    num_pulses: usize,
    num_vars: usize,
    subcarriers: usize,
    nonzero_len: usize,
    xi_db: f64,
    mean_papr_db: f64,
    per_pulse_papr_db: Vec<f64>,
    flat_unitary_deviation: f64,
    zero_violation: f64,
}

/// Smallest per-transmitter degradation factor.
fn set_xi_db(ws: &WaveformSet) -> f64 {
    (0..ws.num_tx())
        .map(|a| {
            let pulses: Vec<Vec<C64>> = (0..ws.num_pulses()).map(|p| ws.freq(a, p).to_vec()).collect();
            xi_db(&pulses, ws.num_tx())
        })
        .fold(f64::INFINITY, f64::min)
}

fn validate_design(d: &DesignSection) -> Result<(Layout, usize), Failure> {
    let layout = Layout::new(d.subcarriers, d.range_cells, d.eta_max).map_err(cfg_err)?;
    let design = design_for(d.num_tx).map_err(cfg_err)?;
    let pulses = d.num_pulses.unwrap_or(design.num_vars());
    if pulses == 0 || pulses % design.num_vars() != 0 {
        return Err(cfg_err(format!(
            "num_pulses = {pulses} must be a positive multiple of {} for {} transmitters",
            design.num_vars(),
            d.num_tx
        )));
    }
    match d.method {
        Method::Micf => {
            d.micf_config(pulses, 0).layout().map_err(cfg_err)?;
            if d.search_trials == Some(0) {
                return Err(cfg_err("search_trials must be at least 1"));
            }
        }
        Method::Paraunitary => {
            if d.search_trials.is_some() {
                return Err(cfg_err("search_trials applies to the micf method only"));
            }
            let nt = layout.nonzero_len();
            if nt < pulses {
                return Err(cfg_err(format!("paraunitary order {pulses} exceeds N_t = {nt}")));
            }
        }
    }
    Ok((layout, pulses))
}

fn run_design(d: &DesignSection, seed: u64) -> Result<(WaveformSet, DesignReport), Failure> {
    let (layout, pulses) = validate_design(d)?;
    let seed = d.seed.unwrap_or(seed);
    let (ws, report) = match d.method {
        Method::Micf => {
            let (seed, search) = match d.search_trials {
                Some(n) => {
                    let s = monte_carlo_cdf(&d.micf_config(pulses, seed), n, d.thresholds()).map_err(run_err)?;
                    (s.best_trial(d.thresholds()).seed, Some((n, s.qualifying)))
                }
                None => (seed, None),
            };
            let (r, ws) = micf_waveform_set(&d.micf_config(pulses, seed)).map_err(run_err)?;
            let report = DesignReport {
                method: "micf",
                seed,
                search_trials: search.map(|s| s.0),
                search_qualifying: search.map(|s| s.1),
                num_tx: ws.num_tx(),
                num_pulses: ws.num_pulses(),
                num_vars: ws.num_vars(),
                subcarriers: layout.subcarriers,
                nonzero_len: layout.nonzero_len(),
                xi_db: r.xi_db,
                mean_papr_db: r.mean_papr_db,
                per_pulse_papr_db: r.per_pulse_papr_db,
                flat_unitary_deviation: verify_flat_unitary(&ws),
                zero_violation: ws.zero_violation(),
            };
            (ws, report)
        }
        Method::Paraunitary => {
            let base = paraunitary_pulses(pulses, layout, d.num_tx, seed).map_err(run_err)?;
            let ws = place_blocks(&design_for(d.num_tx).map_err(run_err)?, layout, &base).map_err(run_err)?;
            let per_pulse_papr_db = base
                .iter()
                .map(|s| papr_db(s, d.oversampling, layout.support()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(run_err)?;
            let report = DesignReport {
                method: "paraunitary",
                seed,
                search_trials: None,
                search_qualifying: None,
                num_tx: ws.num_tx(),
                num_pulses: ws.num_pulses(),
                num_vars: ws.num_vars(),
                subcarriers: layout.subcarriers,
                nonzero_len: layout.nonzero_len(),
                xi_db: set_xi_db(&ws),
                mean_papr_db: per_pulse_papr_db.iter().sum::<f64>() / per_pulse_papr_db.len() as f64,
                per_pulse_papr_db,
                flat_unitary_deviation: verify_flat_unitary(&ws),
                zero_violation: ws.zero_violation(),
            };
            (ws, report)
        }
    };
    Ok((ws, report))
}

pub fn design(cfg: &RunConfig, opts: &Options) -> Result<Outputs, Failure> {
    let d = cfg.design.as_ref().ok_or_else(|| cfg_err("missing [design] section"))?;
    validate_design(d)?;
    let (ws, report) = run_design(d, opts.seed)?;
    let mut out = Outputs::default();
    let mut bin = Vec::new();
    ws.write_binary(&mut bin).map_err(run_err)?;
    out.add("waveforms.bin", bin);
    let mut csv = Vec::new();
    ws.write_csv(&mut csv).map_err(run_err)?;
    out.add("waveforms.csv", csv);
    out.json("design.json", &report)?;
    Ok(out)
}

enum Source {
    File(WaveformSet),
    Design(DesignSection),
}

/// Resolves the waveform source without running any design.
fn waveform_source(cfg: &RunConfig) -> Result<Source, Failure> {
    match (&cfg.waveforms, &cfg.design) {
        (Some(path), None) => {
            let f = std::fs::File::open(path).map_err(|e| cfg_err(format!("cannot open {}: {e}", path.display())))?;
            let ws = WaveformSet::read_binary(std::io::BufReader::new(f))
                .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
            Ok(Source::File(ws))
        }
        (None, Some(d)) => {
            validate_design(d)?;
            Ok(Source::Design(d.clone()))
        }
        (Some(_), Some(_)) => Err(cfg_err("give either `waveforms` or a [design] section, not both")),
        (None, None) => Err(cfg_err("need `waveforms = PATH` or a [design] section")),
    }
}

fn source_layout(src: &Source) -> Result<(Layout, usize), Failure> {
    match src {
        Source::File(ws) => Ok((ws.layout(), ws.num_tx())),
        Source::Design(d) => Ok((validate_design(d)?.0, d.num_tx)),
    }
}

fn materialize(src: Source, seed: u64) -> Result<(WaveformSet, Option<DesignReport>), Failure> {
    match src {
        Source::File(ws) => Ok((ws, None)),
        Source::Design(d) => {
            let (ws, r) = run_design(&d, seed)?;
            Ok((ws, Some(r)))
        }
    }
}

fn resolve_scene(cfg: &RunConfig, layout: Layout, num_tx: usize) -> Result<Scene, Failure> {
    let sc = cfg.scene.as_ref().ok_or_else(|| cfg_err("missing [scene] section"))?;
    let scene = sc.resolve().map_err(cfg_err)?;
    scene.check_layout(layout).map_err(cfg_err)?;
    if scene.num_tx != num_tx {
        return Err(cfg_err(format!("scene has {} transmitters, waveforms {num_tx}", scene.num_tx)));
    }
    Ok(scene)
}

fn noise_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add(1 + repeat as u64)
}

#[derive(Serialize)]
struct PairSummary {
    rx: usize,
    tx: usize,
    eta: usize,
    mse: f64,
    snr_empirical_db: Option<f64>,
    snr_theory_db: Option<f64>,
    snr_max_db: Option<f64>,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn simulate(cfg: &RunConfig, opts: &Options) -> Result<Outputs, Failure> {
    let src = waveform_source(cfg)?;
    let (layout, num_tx) = source_layout(&src)?;
    let scene = resolve_scene(cfg, layout, num_tx)?;
    let sim = cfg.simulate.clone().unwrap_or(crate::config::SimulateSection { repeats: 1, noiseless: false });
    if sim.repeats == 0 {
        return Err(cfg_err("repeats must be at least 1"));
    }
    let noiseless = sim.noiseless || scene.sigma_n2 == 0.0;
    let (ws, report) = materialize(src, opts.seed)?;

    let sep = Separator::new(&ws).map_err(run_err)?;
    let rcs = sample_rcs(&scene, opts.seed);
    let clean = synthesize_received(&ws, &rcs, &scene, None).map_err(run_err)?;
    let n = layout.subcarriers as f64;
    let (nr, nt, m) = (scene.num_rx, scene.num_tx, scene.range_cells);
    let repeats = if noiseless { 1 } else { sim.repeats };
    let mut first: Option<RangeEstimate> = None;
    let mut noise_power = vec![0.0; nr * nt];
    let mut mse_sum = 0.0;
    for r in 0..repeats {
        let frame = if noiseless { clean.clone() } else { clean.with_noise(scene.sigma_n2, noise_seed(opts.seed, r)) };
        let est = reconstruct_with(&frame, &sep, &ws, &scene).map_err(run_err)?;
        mse_sum += est.mse(&rcs.g);
        for b in 0..nr {
            for a in 0..nt {
                noise_power[b * nt + a] += est
                    .d_hat
                    .pair(b, a)
                    .iter()
                    .zip(rcs.d.pair(b, a))
                    .map(|(x, d)| (x - d * n.sqrt()).norm_sqr())
                    .sum::<f64>()
                    / m as f64;
            }
        }
        if first.is_none() {
            first = Some(est);
        }
    }
    let est = first.expect("at least one repeat");

    let mut pairs = Vec::new();
    for b in 0..nr {
        for a in 0..nt {
            let signal = if scene.target_cells.is_empty() {
                0.0
            } else {
                scene.target_cells.iter().map(|&c| rcs.d.get(b, a, c).norm_sqr()).sum::<f64>() / scene.target_cells.len() as f64
            };
            let has_snr = !noiseless && signal > 0.0;
            let noise = noise_power[b * nt + a] / repeats as f64;
            let harmonic: f64 = ws.power_profile(a).iter().map(|c| 1.0 / c).sum();
            let mse = {
                let g = est.g_hat.pair(b, a);
                g.iter().zip(rcs.g.pair(b, a)).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / m as f64
            };
            pairs.push(PairSummary {
                rx: b,
                tx: a,
                eta: scene.eta[b][a],
                mse,
                snr_empirical_db: has_snr.then(|| db(n * signal / noise)),
                snr_theory_db: has_snr.then(|| db(n * n * signal / (scene.sigma_n2 * harmonic))),
                snr_max_db: has_snr.then(|| db(signal / (nt as f64 * scene.sigma_n2))),
            });
        }
    }

    let mut out = Outputs::default();
    let mut csv = Vec::new();
    est.write_csv(&mut csv).map_err(run_err)?;
    out.add("range_estimate.csv", csv);
    let mut truth = Vec::new();
    write_cube_csv(&rcs.g, &mut truth).map_err(run_err)?;
    out.add("rcs_truth.csv", truth);
    out.json(
        "summary.json",
        &json!({
            "rcs_seed": opts.seed,
            "noise_seeds": if noiseless { vec![] } else { (0..repeats).map(|r| noise_seed(opts.seed, r)).collect::<Vec<_>>() },
            "noiseless": noiseless,
            "repeats": repeats,
            "mse": est.mse(&rcs.g),
            "mse_mean": mse_sum / repeats as f64,
            "xi_db": set_xi_db(&ws),
            "delay_residual": scene.delay_residual,
            "pairs": pairs,
            "design": report,
        }),
    )?;
    Ok(out)
}

pub fn compare(cfg: &RunConfig, opts: &Options) -> Result<Outputs, Failure> {
    let src = waveform_source(cfg)?;
    let (layout, num_tx) = source_layout(&src)?;
    let scene = resolve_scene(cfg, layout, num_tx)?;
    let cmp = cfg.compare.as_ref().ok_or_else(|| cfg_err("missing [compare] section"))?;
    if cmp.baselines.is_empty() {
        return Err(cfg_err("compare needs at least one baseline"));
    }
    let code_len = cmp.code_len.unwrap_or(layout.nonzero_len());
    let codes: Option<CodeSet> = if cmp.baselines.contains(&Baseline::Pcode) {
        let set = match &cmp.code_file {
            Some(p) => load_code_set(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?,
            None => p4_code_set(num_tx, code_len).map_err(cfg_err)?,
        };
        if set.num_tx() < num_tx {
            return Err(cfg_err(format!("code set has {} codes for {num_tx} transmitters", set.num_tx())));
        }
        let chips: Vec<Vec<C64>> = (0..num_tx).map(|a| set.code(a).to_vec()).collect();
        Some(CodeSet::new(set.label.clone(), chips).map_err(cfg_err)?)
    } else {
        None
    };
    if code_len < 2 || !cmp.lfm_kappa.is_finite() {
        return Err(cfg_err("code_len must be at least 2 and lfm_kappa finite"));
    }
    let (ws, _) = materialize(src, opts.seed)?;
    let noise = if cmp.noiseless || scene.sigma_n2 == 0.0 { None } else { Some(noise_seed(opts.seed, 0)) };

    let rcs = sample_rcs(&scene, opts.seed);
    let frame = synthesize_received(&ws, &rcs, &scene, noise).map_err(run_err)?;
    let sep = Separator::new(&ws).map_err(run_err)?;
    let ofdm = reconstruct_with(&frame, &sep, &ws, &scene).map_err(run_err)?;
    let num_pulses = ws.num_pulses();
    let mut baselines: Vec<(Baseline, BaselineEstimate)> = Vec::new();
    for b in &cmp.baselines {
        let est = match b {
            Baseline::Pcode => {
                pcode_simulate(&scene, &rcs, codes.as_ref().expect("loaded above"), num_pulses, noise).map_err(run_err)?
            }
            Baseline::Fdlfm => fd_lfm_simulate(&scene, &rcs, code_len, cmp.lfm_kappa, num_pulses, noise).map_err(run_err)?,
        };
        baselines.push((*b, est));
    }

    let name = |b: Baseline| match b {
        Baseline::Pcode => "pcode",
        Baseline::Fdlfm => "fdlfm",
    };
    let mut csv = String::from("rx,tx,m,true_abs,ofdm_abs");
    for (b, _) in &baselines {
        csv.push_str(&format!(",{}_abs", name(*b)));
    }
    csv.push('\n');
    for rx in 0..scene.num_rx {
        for tx in 0..scene.num_tx {
            for m in 0..scene.range_cells {
                csv.push_str(&format!(
                    "{rx},{tx},{m},{:e},{:e}",
                    rcs.g.get(rx, tx, m).norm(),
                    ofdm.g_hat.get(rx, tx, m).norm()
                ));
                for (_, e) in &baselines {
                    csv.push_str(&format!(",{:e}", e.g_hat.get(rx, tx, m).norm()));
                }
                csv.push('\n');
            }
        }
    }
    let mut mse = serde_json::Map::new();
    let mut seeds = serde_json::Map::new();
    mse.insert("ofdm".into(), json!(ofdm.mse(&rcs.g)));
    seeds.insert("ofdm".into(), json!({"rcs": opts.seed, "noise": noise}));
    for (b, e) in &baselines {
        mse.insert(name(*b).into(), json!(e.mse(&rcs.g)));
        seeds.insert(name(*b).into(), json!({"rcs": opts.seed, "noise": noise}));
    }
    let mut out = Outputs::default();
    out.add("compare.csv", csv.into_bytes());
    out.json(
        "compare.json",
        &json!({
            "seeds": seeds,
            "mse": mse,
            "code_set": codes.as_ref().map(|c| c.label.clone()),
            "code_len": code_len,
            "lfm_kappa": cmp.lfm_kappa,
            "noiseless": noise.is_none(),
        }),
    )?;
    Ok(out)
}

pub fn montecarlo(cfg: &RunConfig, opts: &Options) -> Result<Outputs, Failure> {
    let mc = cfg.montecarlo.as_ref().ok_or_else(|| cfg_err("missing [montecarlo] section"))?;
    let trials = opts.trials.unwrap_or(mc.trials);
    if trials == 0 {
        return Err(cfg_err("trial count must be at least 1"));
    }
    if mc.num_pulses.is_empty() {
        return Err(cfg_err("num_pulses needs at least one entry"));
    }
    let thresholds = Thresholds { xi_min_db: mc.xi_min_db, papr_max_db: mc.papr_max_db };
    let configs: Vec<MicfConfig> = mc
        .num_pulses
        .iter()
        .map(|&p| MicfConfig {
            subcarriers: mc.subcarriers,
            range_cells: mc.range_cells,
            eta_max: mc.eta_max,
            num_tx: mc.num_tx,
            num_pulses: p,
            iterations: mc.iterations,
            papr_target_db: mc.papr_target_db,
            freq_clip: mc.freq_clip,
            oversampling: mc.oversampling,
            seed: opts.seed,
        })
        .collect();
    for c in &configs {
        c.layout().map_err(cfg_err)?;
    }
    let mut out = Outputs::default();
    let mut table = String::from("num_pulses,trials,qualifying,median_mean_papr_db,median_xi_db\n");
    let mut rows = Vec::new();
    for c in &configs {
        let s = monte_carlo_cdf(c, trials, thresholds).map_err(run_err)?;
        let mut csv = Vec::new();
        s.write_cdf_csv(&mut csv).map_err(run_err)?;
        out.add(&format!("cdf_p{}.csv", c.num_pulses), csv);
        table.push_str(&format!(
            "{},{trials},{},{:e},{:e}\n",
            c.num_pulses,
            s.qualifying,
            s.median_papr(),
            s.median_xi()
        ));
        rows.push(json!({
            "num_pulses": c.num_pulses,
            "qualifying": s.qualifying,
            "median_mean_papr_db": s.median_papr(),
            "median_xi_db": s.median_xi(),
        }));
    }
    out.add("table.csv", table.into_bytes());
    out.json(
        "montecarlo.json",
        &json!({ "seed": opts.seed, "trials": trials, "thresholds": thresholds, "studies": rows }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    /// Informational checks do not fail the command.
    required: bool,
    value: f64,
    tolerance: f64,
}

fn check(name: &str, value: f64, tolerance: f64, required: bool) -> Check {
    Check { name: name.to_string(), pass: value <= tolerance, required, value, tolerance }
}

pub fn verify(cfg: &RunConfig, opts: &Options) -> Result<Outputs, Failure> {
    let src = waveform_source(cfg)?;
    let (layout, num_tx) = source_layout(&src)?;
    let scene = match &cfg.scene {
        Some(_) => Some(resolve_scene(cfg, layout, num_tx)?),
        None => None,
    };
    let (ws, _) = materialize(src, opts.seed)?;
    let scale = (0..num_tx)
        .flat_map(|a| ws.power_profile(a))
        .fold(0.0, f64::max);
    let max_sample = (0..num_tx)
        .flat_map(|a| (0..ws.num_pulses()).map(move |p| (a, p)))
        .flat_map(|(a, p)| ws.time(a, p).iter().map(|v| v.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max);

    let mut checks = vec![
        check("zero_conditions", ws.zero_violation(), 1e-10 * max_sample.max(f64::MIN_POSITIVE), true),
        check("flat_unitary", verify_flat_unitary(&ws), 1e-10 * scale, false),
        check("cod_identity_x2", verify_cod(&alamouti_design(), 1000, opts.seed), 1e-12, true),
        check("cod_identity_x4", verify_cod(&cod4_design(), 1000, opts.seed), 1e-12, true),
    ];
    let energy_dev = (0..num_tx)
        .map(|a| ((0..ws.num_pulses()).map(|p| ws.pulse_energy(a, p)).sum::<f64>() * num_tx as f64 - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(check("energy_per_transmitter", energy_dev, 1e-9, false));
    let rank = Separator::general(&ws);
    checks.push(Check {
        name: "full_row_rank".into(),
        pass: rank.is_ok(),
        required: true,
        value: if rank.is_ok() { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });

    // DFT against the direct sum on a deterministic probe
    let n = layout.subcarriers;
    let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let fast = dft_unitary(&x).map_err(run_err)?;
    let dft_err = (0..n)
        .map(|k| {
            let s: C64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * C64::from_polar(1.0, -std::f64::consts::TAU * ((i * k) % n) as f64 / n as f64))
                .sum::<C64>()
                / (n as f64).sqrt();
            (s - fast[k]).norm()
        })
        .fold(0.0, f64::max);
    checks.push(check("dft_direct_sum", dft_err, 1e-9, true));

    if let (Some(scene), Ok(sep)) = (&scene, &rank) {
        let rcs = sample_rcs(scene, opts.seed);
        let frame = synthesize_received(&ws, &rcs, scene, None).map_err(run_err)?;
        let est = reconstruct_with(&frame, sep, &ws, scene).map_err(run_err)?;
        checks.push(check("noiseless_reconstruction", max_relative_error(&est.g_hat, &rcs.g), 1e-9, true));
        let want = Cube::from_fn(scene.num_rx, scene.num_tx, scene.range_cells, |b, a, m| {
            rcs.d.get(b, a, m) * (n as f64).sqrt()
        });
        checks.push(check("sqrt_n_gain", max_relative_error(&est.d_hat, &want), 1e-10, true));
    }

    let failed: Vec<String> = checks.iter().filter(|c| c.required && !c.pass).map(|c| c.name.clone()).collect();
    let mut out = Outputs::default();
    out.json("verify.json", &json!({ "seed": opts.seed, "xi_db": set_xi_db(&ws), "checks": checks }))?;
    if !failed.is_empty() {
        out.failure = Some(format!("verification failed: {}", failed.join(", ")));
    }
    Ok(out)
}
