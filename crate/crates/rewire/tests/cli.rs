//! Exit-code and output contract of the command-line interface.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_rewire");

fn write_cfg(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let text = format!(
        "data = synthetic\n\
         synthetic_samples = 300\n\
         synthetic_input_dim = 8\n\
         synthetic_classes = 2\n\
         layer_sizes = 8,16,2\n\
         multipliers = 1,1\n\
         p0 = 0.5\n\
         eta = 0.05\n\
         batch = 10\n\
         epochs = 2\n\
         cadence = 10\n\
         metrics_out = {}\n\
         {extra}",
        dir.join(format!("{name}.csv")).display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (Option<i32>, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn train_succeeds_and_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "ok.cfg", "optimizer = deep_r\n");
    let (code, stdout, _) = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code, Some(0));
    assert!(stdout.contains("final_test_accuracy"), "{stdout}");
    assert!(dir.path().join("ok.cfg.csv").exists());
    // resolved-config sidecar round-trips
    assert!(dir.path().join("ok.cfg.config").exists());
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "no_such_key = 1\n");
    let (code, _, stderr) = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("no_such_key"), "{stderr}");
}

#[test]
fn missing_config_file_exits_1() {
    let (code, _, stderr) = run(&["train", "/nonexistent/path.cfg"]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn numerical_abort_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "diverge.cfg", "optimizer = sgd\neta = 1e18\n");
    let (code, _, stderr) = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code, Some(2));
    assert!(stderr.contains("numerical"), "{stderr}");
    // partial metrics are kept
    assert!(dir.path().join("diverge.cfg.csv").exists());
}

#[test]
fn unknown_suite_exits_1() {
    let (code, _, stderr) = run(&["bench-theory", "--suite", "nonsense"]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("unknown suite"), "{stderr}");
}

#[test]
fn counting_suite_passes_and_prints_report() {
    let (code, stdout, _) = run(&["bench-theory", "--suite", "counting"]);
    assert_eq!(code, Some(0));
    assert!(stdout.contains("mu_count"), "{stdout}");
    assert!(stdout.contains("pass"), "{stdout}");
}

#[test]
fn emit_plots_writes_tables_and_rejects_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", "optimizer = deep_r\n");
    let (code, _, _) = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code, Some(0));
    let metrics = dir.path().join("run.cfg.csv");
    let plots = dir.path().join("plots");
    let (code, stdout, _) = run(&[
        "emit-plots",
        metrics.to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout.lines().count(), 3, "{stdout}");

    let odd = dir.path().join("odd.csv");
    std::fs::write(&odd, "x,y\n1,2\n").unwrap();
    let (code, _, stderr) = run(&[
        "emit-plots",
        odd.to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("schema"), "{stderr}");
}

#[test]
fn sweep_and_transfer_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_cfg = write_cfg(
        dir.path(),
        "sweep.cfg",
        &format!(
            "optimizer = deep_r\nsweep_p0 = 0.25,0.5\nsweep_out = {}\n",
            dir.path().join("sweep.csv").display()
        ),
    );
    let (code, _, _) = run(&["sweep", sweep_cfg.to_str().unwrap()]);
    assert_eq!(code, Some(0));
    let summary = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(summary.starts_with("p0,"), "{summary}");

    let transfer_cfg = write_cfg(
        dir.path(),
        "transfer.cfg",
        &format!(
            "optimizer = deep_r\ntransfer = true\nprobe_samples = 20\ncorrelations_out = {}\n",
            dir.path().join("corr.csv").display()
        ),
    );
    let (code, _, _) = run(&["transfer", transfer_cfg.to_str().unwrap()]);
    assert_eq!(code, Some(0));
    assert!(dir.path().join("corr.csv").exists());

    // transfer via plain train config without the flag is a config error
    let plain = write_cfg(dir.path(), "plain.cfg", "optimizer = deep_r\n");
    let (code, _, _) = run(&["transfer", plain.to_str().unwrap()]);
    assert_eq!(code, Some(1));
}
