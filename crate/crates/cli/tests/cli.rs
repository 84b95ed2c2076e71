use std::process::Command;

use sketchgrad_cli::{run_args, CliError};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sketchgrad"));
    c.env_remove("SKETCHGRAD_THREADS");
    c
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).expect("valid JSON")
}

#[test]
fn verify_cm_passes_with_json_report() {
    let out = bin()
        .args([
            "verify", "--suite", "cm", "--trials", "10000", "--seed", "7",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&String::from_utf8(out.stdout).unwrap());
    let lines = report["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l["pass"] == true));
}

#[test]
fn cas_bucket_count_above_cluster_size_is_a_usage_error() {
    let out = bin()
        .args(["verify", "--suite", "cas", "--m", "300", "--nk", "100"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m <= nk"));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = bin()
        .args(["train", "--config", "/no/such/file.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_and_subcommand_are_usage_errors() {
    assert_eq!(
        bin()
            .args(["train", "--bogus", "1"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bin().args(["fly"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
}

#[test]
fn bad_thread_variable_is_a_usage_error() {
    let out = bin()
        .env("SKETCHGRAD_THREADS", "zero")
        .args(["topk", "--trials", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identity_training_reaches_the_optimum() {
    let outcome = run_args([
        "sketchgrad",
        "train",
        "--compressor",
        "identity",
        "--iterations",
        "400",
    ])
    .unwrap();
    let summary = json(&outcome.stdout);
    assert!(summary["final_grad_norm_sq"].as_f64().unwrap() <= 1e-8);
    assert!(outcome.pass);
}

#[test]
fn casq_training_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = bin()
        .args([
            "train",
            "--compressor",
            "casq",
            "--iterations",
            "200",
            "--out",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap());
    assert_eq!(summary["bound_holds"], true);
    assert_eq!(summary["schema_version"], 1);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,f,grad_norm_sq,err_norm_sq_0,err_norm_sq_1,err_norm_sq_2,err_norm_sq_3,bound,bytes"
    );
    assert_eq!(lines.count(), 201);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# sizes\n[bench]\nsizes = 1e4\nbuckets = 1024\n[general]\nformat = json\n",
    )
    .unwrap();
    let from_file = run_args([
        "sketchgrad",
        "bench-comm",
        "--config",
        cfg.to_str().unwrap(),
    ])
    .unwrap();
    let rows = json(&from_file.stdout);
    assert!(rows.as_array().unwrap().iter().all(|r| r["n"] == 10_000));
    assert!(from_file.stdout.contains("M=1024"));

    let flagged = run_args([
        "sketchgrad",
        "bench-comm",
        "--config",
        cfg.to_str().unwrap(),
        "--buckets",
        "2048",
    ])
    .unwrap();
    assert!(flagged.stdout.contains("M=2048"));
}

#[test]
fn bench_comm_reports_expected_sizes() {
    let outcome = run_args([
        "sketchgrad",
        "bench-comm",
        "--sizes",
        "1e6",
        "--format",
        "json",
    ])
    .unwrap();
    let rows = json(&outcome.stdout);
    let bits = |prefix: &str| {
        rows.as_array()
            .unwrap()
            .iter()
            .find(|r| r["scheme"].as_str().unwrap().starts_with(prefix))
            .map(|r| r["bits"].as_u64().unwrap())
            .unwrap()
    };
    assert_eq!(bits("dense-32"), 32_000_000);
    // header 37 + 16 bytes, 4096 f32 means, 10^6 two-bit labels
    assert_eq!(bits("casq-2bit"), 8 * (37 + 16) + 32 * 4096 + 2_000_000);
    assert!(bits("sparse") < bits("coordinate"));
}

#[test]
fn topk_check_passes_and_rejects_bad_blocks() {
    let ok = run_args([
        "sketchgrad",
        "topk",
        "--blocks",
        "16",
        "--topk-blocks",
        "4",
        "--trials",
        "200",
    ])
    .unwrap();
    assert!(ok.pass);
    let bad = run_args(["sketchgrad", "topk", "--blocks", "4", "--topk-blocks", "5"]);
    assert!(matches!(bad, Err(CliError::Usage(_))));
}

#[test]
fn out_flag_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/topk.json");
    let outcome = run_args([
        "sketchgrad",
        "topk",
        "--trials",
        "50",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ])
    .unwrap();
    outcome.write_files().unwrap();
    let report = json(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(report["pass"], true);
    assert!(outcome.stdout.contains("holds"));
}

#[test]
fn sparse_training_converges_on_the_ring() {
    let outcome = run_args([
        "sketchgrad",
        "train",
        "--compressor",
        "sparse",
        "--topology",
        "ring",
        "--lambda",
        "1",
        "--lr-scale",
        "0.2",
        "--iterations",
        "1000",
    ])
    .unwrap();
    let summary = json(&outcome.stdout);
    assert!(summary["final_f"].as_f64().unwrap() < 1e-2);
    assert!(summary["final_grad_norm_sq"].as_f64().unwrap() < 1e-2);
}
