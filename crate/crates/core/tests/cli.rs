//! End-to-end runs of the `photon-shadow` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use photon_shadow::haar::{sample_haar, RngSeed};
use photon_shadow::matcore::{frobenius_distance, ComplexMatrix, DensityMatrix, UnitaryMatrix};
use photon_shadow::shadow::ScalingSeries;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_photon-shadow"));
    c.env_remove("PHOTON_SHADOW_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    fs::write(path, serde_json::to_string(value).unwrap()).unwrap();
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

const SMALL: &[&str] = &["simulate", "--protocol", "I", "--M", "200", "--grid", "10,50,200", "--replications", "4"];

#[test]
fn simulate_writes_artifacts_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a"), p(&dir, "b"));
    let out = run(&[SMALL, &["--seed", "3", "--out-dir", &a]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("M = 200"));
    let out = run(&[SMALL, &["--seed", "3", "--out-dir", &b, "--workers", "3"]].concat());
    assert_eq!(code(&out), 0);
    for f in ["series.csv", "reconstruction.json"] {
        let (x, y) = (fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
        assert_eq!(x, y, "{f} differs between runs");
    }
    assert!(!dir.path().join("a/noise.json").exists());

    let text = fs::read_to_string(dir.path().join("a/series.csv")).unwrap();
    assert!(text.starts_with("M,mse_mean,mse_stderr,replications\n"));
    let series = ScalingSeries::read_csv(text.as_bytes(), 8).unwrap();
    assert_eq!(series.ms(), vec![10, 50, 200]);
    let recon = json(&dir.path().join("a/reconstruction.json"));
    assert_eq!(recon["M"], 200);
    assert!(recon["frobenius_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn noisy_simulate_writes_noise_model() {
    let dir = TempDir::new().unwrap();
    let out = run(&[SMALL, &["--p", "0.1", "--epsilon", "0.01", "--out-dir", &p(&dir, "n")]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let noise = json(&dir.path().join("n/noise.json"));
    assert!((noise["p"].as_f64().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "# small run\nprotocol = III\nM = 100\ngrid = 10,100\nreplications = 2\nout_dir = {}\n",
            p(&dir, "from_cfg")
        ),
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("d = 4"));
    assert!(dir.path().join("from_cfg/series.csv").exists());

    let out = run(&["--config", cfg.to_str().unwrap(), "simulate", "--replications", "3", "--out-dir", &p(&dir, "flag")]);
    assert_eq!(code(&out), 0);
    let series = fs::read_to_string(dir.path().join("flag/series.csv")).unwrap();
    assert!(series.lines().nth(1).unwrap().ends_with(",3"));
    assert!(!dir.path().join("from_cfg/reconstruction.json").metadata().unwrap().permissions().readonly());

    fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap(), "simulate"])), 1);
}

#[test]
fn out_dir_env_var_is_the_default() {
    let dir = TempDir::new().unwrap();
    let target = p(&dir, "env");
    let out = bin().args(SMALL).env("PHOTON_SHADOW_OUT_DIR", &target).output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("env/series.csv").exists());
}

#[test]
fn simulate_usage_errors() {
    assert_eq!(code(&run(&["simulate", "--protocol", "V"])), 1);
    assert_eq!(code(&run(&["simulate", "--M", "100", "--grid", "50,10"])), 1);
    assert_eq!(code(&run(&["simulate", "--M", "100", "--grid", "10,500"])), 1);
    assert_eq!(code(&run(&["simulate", "--protocol", "III", "--d", "8"])), 1);
    assert_eq!(code(&run(&["simulate", "--p", "1.5", "--M", "10"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
}

fn analyze(args: &[&str]) -> (i32, Value) {
    let out = run(&[&["analyze"], args].concat());
    let v = if out.status.success() {
        serde_json::from_slice(&out.stdout).unwrap()
    } else {
        Value::Null
    };
    (code(&out), v)
}

#[test]
fn analyze_reproduces_published_rows() {
    let rows = [
        ("0.90889,-0.00820,-0.00075,0.03102,0.02638,0.02146,0.01411,0.00707", "1.12873e-2", 0.10412, 0.01198),
        ("0.98087,0.02503,0.01116,-0.01150", "1.43278e-3", 0.02550, 0.01271),
    ];
    for (eig, slope, p_want, eps_want) in rows {
        let (c, r) = analyze(&["--eigenvalues", eig, "--slope", slope]);
        assert_eq!(c, 0);
        assert!((r["p_hat"].as_f64().unwrap() - p_want).abs() <= 5e-5, "{r}");
        assert!((r["epsilon_hat"].as_f64().unwrap() - eps_want).abs() <= 5e-5, "{r}");
        assert!(r["m_crit"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn analyze_reports_model_inconsistency() {
    let (c, _) = analyze(&["--d1", "0.5", "--d", "8", "--slope", "1e-6"]);
    assert_eq!(c, 3);
    let (c, _) = analyze(&["--d1", "0.9", "--slope", "1e-2"]);
    assert_eq!(c, 1);
    let (c, _) = analyze(&["--d1", "0.9", "--d", "8"]);
    assert_eq!(c, 1);
}

#[test]
fn analyze_noiseless_series_has_no_horizon() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "simulate", "--protocol", "I", "--M", "2000", "--grid", "10,30,100,300,1000,2000", "--replications", "8",
        "--out-dir", &p(&dir, "s"),
    ]);
    assert_eq!(code(&out), 0);
    let curve = p(&dir, "curve.csv");
    let (c, r) = analyze(&[
        "--series", &p(&dir, "s/series.csv"), "--recon", &p(&dir, "s/reconstruction.json"), "--curve-csv", &curve,
    ]);
    assert_eq!(c, 0);
    assert!(r["m_crit"].is_null(), "{r}");
    assert!(r["p_hat"].as_f64().unwrap() < 0.05);
    let text = fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("M,observed_mse,predicted_mse\n"));
    assert_eq!(text.lines().count(), 7);
}

fn voltage_csv(rows: &[(u64, usize, [f64; 8])]) -> String {
    let mut s = String::from("run_id,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n");
    for (r, u, v) in rows {
        let vs: Vec<String> = v.iter().map(f64::to_string).collect();
        s.push_str(&format!("{r},{u},{}\n", vs.join(",")));
    }
    s
}

#[test]
fn ingest_normalizes_and_reconstructs() {
    let dir = TempDir::new().unwrap();
    let (volts, unis, snaps) = (p(&dir, "v.csv"), p(&dir, "u.json"), p(&dir, "s.json"));
    fs::write(&volts, voltage_csv(&[(0, 0, [2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])])).unwrap();
    write_json(Path::new(&unis), &vec![UnitaryMatrix::identity(8)]);
    let out = run(&["ingest", "--voltages", &volts, "--unitaries", &unis, "--out", &snaps]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file = json(Path::new(&snaps));
    assert_eq!(file["d"], 8);
    let probs: Vec<f64> = serde_json::from_value(file["snapshots"][0]["probabilities"].clone()).unwrap();
    assert_eq!(probs, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    let recon = p(&dir, "r.json");
    assert_eq!(code(&run(&["reconstruct", "--snapshots", &snaps, "--out", &recon])), 0);
    let r = json(Path::new(&recon));
    assert_eq!(r["M"], 1);
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn ingest_subspace_ignores_outer_channels() {
    let dir = TempDir::new().unwrap();
    let (volts, unis) = (p(&dir, "v.csv"), p(&dir, "u.json"));
    fs::write(&volts, voltage_csv(&[(0, 0, [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0])])).unwrap();
    write_json(Path::new(&unis), &vec![UnitaryMatrix::identity(8)]);
    let out = run(&["ingest", "--voltages", &volts, "--unitaries", &unis, "--protocol", "III"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(file["d"], 4);
    let probs: Vec<f64> = serde_json::from_value(file["snapshots"][0]["probabilities"].clone()).unwrap();
    assert_eq!(probs, vec![0.25; 4]);
}

#[test]
fn ingest_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let (volts, unis) = (p(&dir, "v.csv"), p(&dir, "u.json"));
    write_json(Path::new(&unis), &vec![UnitaryMatrix::identity(8)]);

    fs::write(&volts, voltage_csv(&[])).unwrap();
    let out = run(&["ingest", "--voltages", &volts, "--unitaries", &unis]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no voltage rows"));

    fs::write(&volts, voltage_csv(&[(0, 3, [1.0; 8])])).unwrap();
    let out = run(&["ingest", "--voltages", &volts, "--unitaries", &unis]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no unitary with id 3"));

    fs::write(&volts, "run_id,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n0,0,1,1,x,1,1,1,1,1\n").unwrap();
    let out = run(&["ingest", "--voltages", &volts, "--unitaries", &unis]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}

#[test]
fn reconstruct_scores_against_target() {
    let dir = TempDir::new().unwrap();
    let d = 4;
    let rho = DensityMatrix::basis_state(d, 0).unwrap();
    let snapshots: Vec<Value> = (0..400u32)
        .map(|k| {
            let u = sample_haar(d, RngSeed::new(9, k)).unwrap();
            let probs = photon_shadow::shadow::born_probabilities(&rho, &u).unwrap();
            serde_json::json!({"unitary_id": k, "reported_unitary": u, "probabilities": probs})
        })
        .collect();
    let snaps = p(&dir, "s.json");
    write_json(Path::new(&snaps), &serde_json::json!({"d": d, "snapshots": snapshots}));
    let target = p(&dir, "t.json");
    write_json(Path::new(&target), &rho);

    let out = run(&["reconstruct", "--snapshots", &snaps, "--target", &target]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let err = r["frobenius_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 0.2, "{err}");
    assert_eq!(r["M"], 400);

    fs::write(&snaps, "{\"d\": 4}").unwrap();
    assert_eq!(code(&run(&["reconstruct", "--snapshots", &snaps])), 2);
}

#[test]
fn mesh_round_trip_through_files() {
    let dir = TempDir::new().unwrap();
    let u = sample_haar(6, RngSeed::new(12, 0)).unwrap();
    let (u_path, mesh, back) = (p(&dir, "u.json"), p(&dir, "mesh.json"), p(&dir, "back.json"));
    write_json(Path::new(&u_path), &u);
    assert_eq!(code(&run(&["mesh", "decompose", "--in", &u_path, "--out", &mesh])), 0);
    assert_eq!(code(&run(&["mesh", "compose", "--in", &mesh, "--out", &back])), 0);
    let v: UnitaryMatrix = serde_json::from_str(&fs::read_to_string(&back).unwrap()).unwrap();
    let err = (u.matrix() - v.matrix()).frobenius_norm();
    assert!(err < 1e-10, "{err}");

    let mut m = ComplexMatrix::identity(3);
    m = m.scale_real(2.0);
    write_json(Path::new(&u_path), &m);
    assert_eq!(code(&run(&["mesh", "decompose", "--in", &u_path])), 2);
}

#[test]
fn verify_weingarten_exit_codes() {
    assert_eq!(code(&run(&["verify-weingarten", "--d", "1"])), 1);
    assert_eq!(code(&run(&["verify-weingarten", "--d", "2", "--samples", "100"])), 1);
    let dir = TempDir::new().unwrap();
    let csv = p(&dir, "w.csv");
    let out = run(&["verify-weingarten", "--d", "2", "--samples", "10000", "--seed", "1", "--out", &csv]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("pattern,d,analytic,mc_mean,mc_stderr,z_score\n"));
    assert!(text.lines().count() > 2);
}

#[test]
fn reconstruction_json_matches_its_error_field() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&[SMALL, &["--out-dir", &p(&dir, "r")]].concat())), 0);
    let r = json(&dir.path().join("r/reconstruction.json"));
    let est: ComplexMatrix = serde_json::from_value(r["estimate"].clone()).unwrap();
    let target: ComplexMatrix = serde_json::from_value(r["target"].clone()).unwrap();
    let err = frobenius_distance(&est, &target).unwrap();
    assert!((err - r["frobenius_error"].as_f64().unwrap()).abs() < 1e-12);
}
