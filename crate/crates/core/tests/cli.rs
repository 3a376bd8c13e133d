use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use lqc::cli::{run_scenario, serialize_report, CommandKind, Format, Report, ScenarioConfig};
use lqc::protocols::FidelityStats;
use serde_json::Value;

fn lqc(args: &[&str], env_dir: Option<&Path>) -> (i32, Vec<u8>, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lqc"));
    cmd.args(args).env_remove("LQC_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("LQC_OUTPUT_DIR", d);
    }
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        out.stdout,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON report")
}

#[test]
fn teleport_report_has_expected_frequencies() {
    let (code, out, err) = lqc(&["teleport", "--alpha", "0.6", "--beta", "0.8", "--trials", "10000", "--seed", "7"], None);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    let ex = v["exhaustive"].as_object().unwrap();
    let total: f64 = ex.values().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let sampled = &v["sampled"];
    let count = |k: &str| sampled[k].as_u64().unwrap_or(0) as f64 / 10_000.0;
    let n1 = ["n1.Phi+", "n1.Phi-", "n1.Xi+", "n1.Xi-"].iter().map(|k| count(k)).sum::<f64>();
    let five_sigma = |p: f64| 5.0 * (p * (1.0 - p) / 10_000.0).sqrt();
    assert!((n1 - 0.5).abs() < five_sigma(0.5));
    assert!((count("n0") - 0.25).abs() < five_sigma(0.25));
    assert!((count("n2") - 0.25).abs() < five_sigma(0.25));
    assert_eq!(v["fidelity"]["min"].as_f64(), Some(1.0));
    assert_eq!(v["seed"].as_u64(), Some(7));
}

#[test]
fn identical_runs_are_byte_identical_across_worker_counts() {
    let base = ["chain", "--segments", "3", "--survival", "0.85", "--trials", "400", "--seed", "11", "--sigma", "0.2"];
    let mut one = vec!["--workers", "1"];
    one.extend(base);
    let mut four = vec!["--workers", "4"];
    four.extend(base);
    let (c1, a, _) = lqc(&one, None);
    let (c2, b, _) = lqc(&four, None);
    let (c3, c, _) = lqc(&base, None);
    assert_eq!((c1, c2, c3), (0, 0, 0));
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn config_file_and_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("swap.toml");
    std::fs::write(&cfg, "trials = 200\nseed = 4\nformat = \"csv\"\n").unwrap();
    let (code, out, err) = lqc(&["--config", cfg.to_str().unwrap(), "swap"], Some(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("swap-4.csv")).unwrap();
    assert!(csv.starts_with("section,label,probability,count\n"));
    assert!(csv.contains("branch,Psi+->Phi+,0.25,"));
    assert!(csv.contains("branch,Xi-->Psi-,0.25,"));
}

#[test]
fn explicit_output_path_wins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let (code, out, _) = lqc(
        &["teleport", "--random-qubits", "3", "--trials", "50", "--output", path.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let v = json(&std::fs::read(&path).unwrap());
    assert_eq!(v["summary"]["qubits"].as_f64(), Some(3.0));
    assert!(v["summary"]["probability_spread_over_qubits"].as_f64().unwrap() < 1e-10);
}

#[test]
fn verify_prints_pass_lines() {
    let (code, out, _) = lqc(&["verify"], None);
    assert_eq!(code, 0);
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "trials = 10\nsegmnts = 3\n").unwrap();
    let (code, _, err) = lqc(&["--config", bad.to_str().unwrap(), "chain", "--survival", "0.9"], None);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");

    assert_eq!(lqc(&["chain", "--survival", "1.5"], None).0, 2);
    assert_eq!(lqc(&["chain"], None).0, 2);
    assert_eq!(lqc(&["chain", "--survival", "0.9", "--segments", "0"], None).0, 2);
    assert_eq!(lqc(&["teleport", "--alpha", "0.6", "--beta", "0.7"], None).0, 2);
    assert_eq!(lqc(&["teleport", "--alpha", "banana"], None).0, 2);
    assert_eq!(lqc(&["teleport", "--trials", "0"], None).0, 2);
    assert_eq!(lqc(&["launch"], None).0, 2);
    assert_eq!(lqc(&["--help"], None).0, 0);
}

#[test]
fn empty_report_serializes_with_zero_counts() {
    let report = Report {
        config: ScenarioConfig::default(),
        seed: 0,
        exhaustive: BTreeMap::new(),
        sampled: BTreeMap::new(),
        fidelity: FidelityStats::from_values([]),
        summary: BTreeMap::new(),
        checks: Vec::new(),
    };
    let v = json(&serialize_report(&report, Format::Json).unwrap());
    assert_eq!(v["fidelity"]["count"].as_u64(), Some(0));
    assert!(v["sampled"].as_object().unwrap().is_empty());
    let csv = String::from_utf8(serialize_report(&report, Format::Csv).unwrap()).unwrap();
    assert!(csv.contains("fidelity,mean,,0"));
}

#[test]
fn scenario_config_round_trips() {
    let cfg = ScenarioConfig {
        command: CommandKind::Swap,
        trials: 17,
        seed: 99,
        random_qubits: Some(4),
        segment_length: Some(1.0),
        attenuation_length: Some(2.0),
        ..ScenarioConfig::default()
    };
    assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
}

#[test]
fn library_reports_are_deterministic() {
    let cfg = ScenarioConfig {
        command: CommandKind::Teleport,
        trials: 300,
        seed: 5,
        ..ScenarioConfig::default()
    };
    let a = serialize_report(&run_scenario(&cfg).unwrap(), Format::Json).unwrap();
    let b = serialize_report(&run_scenario(&cfg).unwrap(), Format::Json).unwrap();
    assert_eq!(a, b);
}
