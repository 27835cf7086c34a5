use std::fs;
use std::process::{Command, Output};

fn ris_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-sim"))
        .args(args)
        .output()
        .unwrap()
}

const HEADER: &str = "sweep_var,sweep_value,method,metric,unit,value,stderr,trials,seed";

#[test]
fn rmse_sweep_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "sweep.values = [10.0]\nmethods = [\"mmse\", \"rsls\"]\n",
    )
    .unwrap();
    let out = dir.path().join("rmse.csv");
    let trace = dir.path().join("trace.csv");
    let o = ris_sim(&[
        "rmse-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "40",
        "--seed",
        "9",
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("snr_db,10,mmse,rmse,dB,") && lines[1].ends_with(",40,9"));
    let trace = fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("outer_iter,objective\n0,"));
}

#[test]
fn repeated_runs_are_byte_identical_across_workers() {
    let run = |workers: &str| {
        let o = ris_sim(&["se-sweep", "--trials", "20", "--workers", workers]);
        assert!(o.status.success());
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("3"));
    assert_eq!(a, run("1"));
    assert!(String::from_utf8(a).unwrap().starts_with(HEADER));
}

#[test]
fn gradcheck_exit_codes() {
    let ok = ris_sim(&["gradcheck", "--trials", "8"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS data_gradient_miso"));
    let bad = ris_sim(&["gradcheck", "--trials", "8", "--perturb", "1e-3"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "training.tau = 500\n").unwrap();
    for args in [
        vec!["rmse-sweep", "--config", cfg.to_str().unwrap()],
        vec!["rmse-sweep", "--config", "/nonexistent/run.toml"],
        vec!["se-sweep", "--trials", "0"],
        vec!["rmse-sweep", "--preset", "huge"],
        vec!["frobnicate"],
    ] {
        let o = ris_sim(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn output_path_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_config.csv");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "output = {:?}\nsweep.values = [0.0]\nmethods = [\"mmse\"]\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = ris_sim(&[
        "rmse-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "10",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().starts_with(HEADER));
}
