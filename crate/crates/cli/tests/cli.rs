use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use phonon_qsim::pauli::PauliSum;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonon-qsim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn toy_hamiltonian_is_hermitian_on_six_qubits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    assert!(run(&out, &["hamiltonian"]).status.success());
    let h = PauliSum::from_text(&read(&out, "hamiltonian.txt")).unwrap();
    assert_eq!(h.width(), 6);
    assert!(h.is_hermitian());
    let report: serde_json::Value = serde_json::from_str(&read(&out, "hamiltonian_report.json")).unwrap();
    assert_eq!(report["hermitian"], true);
    assert!((report["ground_energy"].as_f64().unwrap() + 2.0).abs() < 1e-9);
}

#[test]
fn zero_couplings_give_an_empty_sum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[system]\nfrequencies = [1.0, 0.5, 0.5]\ncubic = []\npenalty_weight = 1.0\n");
    let out = tmp.path().join("h");
    assert!(run(&out, &["hamiltonian", "--config", &cfg]).status.success());
    assert!(read(&out, "hamiltonian.txt").trim().is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(run(dir, &["vqe", "--optimizer", "spsa,powell", "--seed", "3"]).status.success());
    }
    for name in ["vqe_history.csv", "vqe_summary.csv", "vqe_convergence.svg", "manifest.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn vqe_compares_all_optimizers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    assert!(run(&out, &["vqe", "--ansatz", "custom"]).status.success());
    let summary = read(&out, "vqe_summary.csv");
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let lbfgs = rows.iter().find(|r| r.starts_with("lbfgs")).unwrap();
    let gap: f64 = lbfgs.split(',').nth(3).unwrap().parse().unwrap();
    assert!(gap < 1e-3);
    assert_eq!(read(&out, "vqe_convergence.svg").matches("<polyline ").count(), 5);
}

#[test]
fn perfect_fidelity_recovers_the_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    assert!(run(&out, &["noise-sweep", "--fidelity", "1.0,0.99", "--ansatz", "custom"]).status.success());
    let csv = read(&out, "noise_sweep_custom.csv");
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 1.0);
    assert!((first[3] - 100.0).abs() < 1e-3);
    assert!(!out.join("noise_sweep_efficient-su2.csv").exists());
}

#[test]
fn out_of_range_fidelity_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    let res = run(&out, &["noise-sweep", "--fidelity", "0.5"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_keys_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[ansatz]\nkind = \"custom\"\nlayers = 3\n");
    let out = tmp.path().join("x");
    assert!(!run(&out, &["hamiltonian", "--config", &cfg]).status.success());
    assert!(!run(&out, &["kappa", "--source", "guess"]).status.success());
    assert!(!out.exists());
}

#[test]
fn mitigation_report_has_every_strategy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[study]\ntrials = 3\nshots = 8192\n");
    let out = tmp.path().join("m");
    assert!(run(&out, &["mitigate", "--config", &cfg]).status.success());
    let csv = read(&out, "mitigation.csv");
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["none", "readout", "twirl", "dd", "zne", "all"]);
    assert_eq!(read(&out, "mitigation_trials.csv").lines().count(), 1 + 6 * 3);
    assert!(read(&out, "mitigation.svg").contains("<rect "));
}

#[test]
fn exact_kappa_matches_the_reference_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("k");
    assert!(run(&out, &["kappa", "--source", "exact"]).status.success());
    let csv = read(&out, "kappa.csv");
    let kappas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    for (k, want) in kappas.iter().zip([7200.133, 2133.613, 900.153, 460.887, 266.720]) {
        assert!((k - want).abs() / want < 0.01, "{k} vs {want}");
    }
    assert_eq!(read(&out, "kappa.svg").matches("<polygon ").count(), 1);
}
