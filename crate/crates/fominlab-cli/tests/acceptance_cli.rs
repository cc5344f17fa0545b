//! Acceptance, reproducibility criterion: identical config and seed yield a
//! byte-identical report, and the report's embedded config re-runs to the
//! same results.

use std::path::Path;
use std::process::Command;

fn run(config_path: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fominlab"))
        .arg("run")
        .arg(config_path)
        .output()
        .expect("binary runs")
}

#[test]
fn acceptance_11_reports_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = format!(
        r#"{{
            "model": {{ "name": "ou" }},
            "sim": {{ "seed": 20260810, "n_paths": 16, "scheme": "euler_maruyama" }},
            "experiment": {{ "fomin_suite": {{
                "sampler": {{ "burn_in": 5.0, "n_samples": 3000, "thin": 0.5 }},
                "battery": ["sin_k1_e1", "cos_k1_e1"],
                "eval_cap": 800,
                "export_score_csv": true
            }} }},
            "output_dir": {:?}
        }}"#,
        out_dir
    );
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, &config).unwrap();

    let first = run(&config_path);
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let report_1 = std::fs::read(out_dir.join("report.json")).unwrap();
    let score_csv_1 = std::fs::read(out_dir.join("score_field.csv")).unwrap();

    let second = run(&config_path);
    assert!(second.status.success());
    let report_2 = std::fs::read(out_dir.join("report.json")).unwrap();
    let score_csv_2 = std::fs::read(out_dir.join("score_field.csv")).unwrap();

    assert_eq!(report_1, report_2, "report.json differs between identical runs");
    assert_eq!(score_csv_1, score_csv_2, "score export differs between identical runs");
    println!("[criterion 11] PASS reproducibility: byte-identical report.json across runs");

    // schema round-trip: the embedded config reproduces the same report
    let report: serde_json::Value = serde_json::from_slice(&report_1).unwrap();
    let embedded = serde_json::to_string_pretty(&report["config"]).unwrap();
    let embedded_path = dir.path().join("embedded.json");
    std::fs::write(&embedded_path, &embedded).unwrap();
    let third = run(&embedded_path);
    assert!(third.status.success(), "embedded config must validate and run");
    let report_3 = std::fs::read(out_dir.join("report.json")).unwrap();
    assert_eq!(report_1, report_3, "embedded config did not reproduce the report");
    println!("[criterion 11] PASS schema round-trip: embedded config re-runs identically");
}
