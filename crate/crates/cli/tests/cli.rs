use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpofdm"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_cfg(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut c = bin();
    c.arg(cmd).arg("--config").arg(cfg).arg("--out").arg(out).args(extra);
    c.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// The reference scenario with the given TOML appended or substituted.
fn reference_variant(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("reference_scene.toml")).unwrap();
    write(dir, "variant.toml", &edit(text))
}

#[test]
fn missing_config_is_config_error_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_cfg("design", &tmp.path().join("nope.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = run(&["design", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["design", "--seed", "abc"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_variant(tmp.path(), |t| t.replace("iterations = 8", "iteration = 8"));
    let out = tmp.path().join("out");
    let o = run_cfg("design", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration"));
    assert!(!out.exists());
}

#[test]
fn invalid_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = reference_variant(tmp.path(), |t| t.replace("eta = [[17, 0], [6, 32]]", "eta = [[17, 0], [6, 41]]"));
    assert_eq!(run_cfg("simulate", &cfg, &out, &[]).status.code(), Some(2));
    let cfg = reference_variant(tmp.path(), |t| t.replace("num_pulses = 2", "num_pulses = 3"));
    assert_eq!(run_cfg("design", &cfg, &out, &[]).status.code(), Some(2));
    assert_eq!(run_cfg("design", &cfg, &out, &["--threads", "0"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn paraunitary_design_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_cfg("design", &configs().join("design_paraunitary.toml"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&tmp.path().join("design.json"));
    assert!(report["xi_db"].as_f64().unwrap() >= -1e-10);
    assert!(tmp.path().join("waveforms.bin").exists());
    assert!(tmp.path().join("waveforms.csv").exists());
}

#[test]
fn designed_container_feeds_simulation_and_mismatch_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("design");
    assert!(run_cfg("design", &configs().join("reference_scene.toml"), &d, &[]).status.success());
    let cfg = reference_variant(tmp.path(), |t| {
        let start = t.find("[design]").unwrap();
        let end = t.find("[scene]").unwrap();
        format!("waveforms = \"design/waveforms.bin\"\n{}{}", &t[..start], &t[end..])
            .replace("sigma_n2 = 0.0630957344480193", "sigma_n2 = 0.0")
    });
    let out = tmp.path().join("sim");
    let o = run_cfg("simulate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&out.join("summary.json"))["mse"].as_f64().unwrap() < 1e-18);

    let bad = write(
        tmp.path(),
        "mismatch.toml",
        &std::fs::read_to_string(&cfg).unwrap().replace("range_cells = 96", "range_cells = 90"),
    );
    let out = tmp.path().join("bad");
    let o = run_cfg("simulate", &bad, &out, &[]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn reference_scenario_noiseless_and_noisy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_variant(tmp.path(), |t| t.replace("repeats = 200", "repeats = 1\nnoiseless = true"));
    let start = Instant::now();
    let o = run_cfg("simulate", &cfg, &tmp.path().join("clean"), &[]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&tmp.path().join("clean/summary.json"));
    assert!(s["mse"].as_f64().unwrap() < 1e-18);
    assert!(tmp.path().join("clean/range_estimate.csv").exists());

    let o = run_cfg("simulate", &configs().join("reference_scene.toml"), &tmp.path().join("noisy"), &[]);
    assert!(o.status.success());
    let s = json(&tmp.path().join("noisy/summary.json"));
    for pair in s["pairs"].as_array().unwrap() {
        let emp = pair["snr_empirical_db"].as_f64().unwrap();
        let theory = pair["snr_theory_db"].as_f64().unwrap();
        assert!((emp - theory).abs() < 0.5, "{pair}");
    }
}

#[test]
fn compare_uses_identical_seeds_and_ranks_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_cfg("compare", &configs().join("reference_scene.toml"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&tmp.path().join("compare.json"));
    let seeds = c["seeds"].as_object().unwrap();
    assert_eq!(seeds["ofdm"], seeds["pcode"]);
    assert_eq!(seeds["ofdm"], seeds["fdlfm"]);
    assert!(c["mse"]["ofdm"].as_f64().unwrap() < c["mse"]["pcode"].as_f64().unwrap());
    let header = std::fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    assert!(header.starts_with("rx,tx,m,true_abs,ofdm_abs,pcode_abs,fdlfm_abs"));
    assert_eq!(header.lines().count(), 1 + 2 * 2 * 96);

    let cfg = reference_variant(tmp.path(), |t| t.replace("lfm_kappa = 1.0", "lfm_kappa = 1.0\nnoiseless = true"));
    let out = tmp.path().join("clean");
    assert!(run_cfg("compare", &cfg, &out, &[]).status.success());
    let c = json(&out.join("compare.json"));
    assert!(c["mse"]["ofdm"].as_f64().unwrap() < 1e-18);
    assert!(c["mse"]["fdlfm"].as_f64().unwrap() > 1e-6);
}

#[test]
fn compare_reads_code_file() {
    let tmp = tempfile::tempdir().unwrap();
    let phases: Vec<String> = (0..2)
        .map(|a| (0..40).map(|n| format!("{}", 0.1 * ((a + 1) * n * n) as f64)).collect::<Vec<_>>().join(","))
        .collect();
    write(tmp.path(), "codes.csv", &(phases.join("\n") + "\n"));
    let cfg = reference_variant(tmp.path(), |t| t.replace("lfm_kappa = 1.0", "lfm_kappa = 1.0\ncode_file = \"codes.csv\""));
    let out = tmp.path().join("out");
    let o = run_cfg("compare", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("compare.json"))["code_set"], "codes");

    write(tmp.path(), "codes.csv", "0,1,2\n0,1\n");
    let out = tmp.path().join("bad");
    let o = run_cfg("compare", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn verify_passes_and_flags_bad_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_cfg("verify", &configs().join("four_tx_geometry.toml"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&tmp.path().join("verify.json"));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    // all-zero pulses are rank deficient
    let layout = cpofdm::Layout::new(64, 4, 2).unwrap();
    let zero = vec![vec![cpofdm::dsp::C64::new(0.0, 0.0); 64]; 4];
    let ws = cpofdm::WaveformSet::from_freq(layout, 2, 2, 2, zero).unwrap();
    let mut bytes = Vec::new();
    ws.write_binary(&mut bytes).unwrap();
    std::fs::write(tmp.path().join("zero.bin"), bytes).unwrap();
    let cfg = write(tmp.path(), "zero.toml", "waveforms = \"zero.bin\"\n");
    let out = tmp.path().join("zero");
    let o = run_cfg("verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&out.join("verify.json"));
    let rank = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "full_row_rank").unwrap();
    assert_eq!(rank["pass"], false);
}

#[test]
fn montecarlo_is_deterministic_and_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("montecarlo_table.toml");
    let small = write(
        tmp.path(),
        "mc.toml",
        &std::fs::read_to_string(&cfg).unwrap().replace("num_pulses = [4, 8, 16, 32]", "num_pulses = [8, 32]"),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_cfg("montecarlo", &small, &a, &["--trials", "60"]).status.success());
    assert!(run_cfg("montecarlo", &small, &b, &["--trials", "60"]).status.success());
    for f in ["cdf_p8.csv", "cdf_p32.csv", "table.csv", "montecarlo.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = json(&a.join("montecarlo.json"));
    let q: Vec<u64> = m["studies"].as_array().unwrap().iter().map(|s| s["qualifying"].as_u64().unwrap()).collect();
    assert!(q[0] < q[1], "{q:?}");

    let out = tmp.path().join("zero");
    assert_eq!(run_cfg("montecarlo", &small, &out, &["--trials", "0"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn design_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = configs().join("design_micf.toml");
    assert!(run_cfg("design", &cfg, &a, &["--threads", "2"]).status.success());
    assert!(run_cfg("design", &cfg, &b, &[]).status.success());
    for f in ["waveforms.bin", "waveforms.csv", "design.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r = json(&a.join("design.json"));
    assert_eq!(r["num_pulses"], 4);
    assert_eq!(r["search_trials"], 200);
}
