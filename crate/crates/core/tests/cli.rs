use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fwgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwgan")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"{
  "dataset": {"kind": "synthetic", "name": "mog", "n_train": 256, "n_valid": 200, "data_seed": 3},
  "loss_variant": "wgan",
  "batch_size": 64,
  "epochs": 4,
  "hidden": [16, 16],
  "optimizer": {"lr": 0.001},
  "eval_every": 2,
  "eval_samples": 200,
  "divergence_batch": 64,
  "seed": 5
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn train(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let cfg = write_config(dir, TINY);
    let run = dir.join(name);
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = fwgan(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    run
}

#[test]
fn train_writes_a_complete_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = train(dir.path(), "run", &["--override", "loss_variant=klwgan", "--override", "checkpoint_every=2"]);
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "epoch,divergence,nll,mmd_x1e3");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(",,"));
    assert!(!lines[2].ends_with(",,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["loss_variant"], "klwgan");
    assert_eq!(manifest["epochs_completed"], 4);
    assert_eq!(manifest["checkpoints"].as_array().unwrap().len(), 2);
    assert!(run.join("checkpoint/state.json").is_file());
    assert!(run.join("checkpoints/epoch_00002/critic.csv").is_file());
}

#[test]
fn same_config_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(dir.path(), "a", &[]);
    let b = train(dir.path(), "b", &[]);
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
}

#[test]
fn default_output_root_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = Command::new(env!("CARGO_BIN_EXE_fwgan"))
        .args(["train", "--config", cfg.to_str().unwrap()])
        .env("FWGAN_OUT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("root/mog-wgan-seed5/metrics.csv").is_file());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dataset": {"kind": "tabular", "path": "/no/such/wine.csv"}, "epochs": 3}"#,
    );
    let o = fwgan(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/wine.csv"));

    let o = fwgan(&["train", "--override", "batch_size=0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batch_size"));

    let o = fwgan(&["train", "--override", "no_such_field=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_field"));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), "warm", &[]);
    // An absurd learning rate on the conjugate-form loss overflows exp(T − 1).
    let cfg = write_config(dir.path(), TINY);
    let o = fwgan(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--override",
        "loss_variant=fgan_kl",
        "--override",
        "optimizer.lr=1e6",
        "--override",
        "spectral_critic=false",
        "--override",
        "epochs=50",
        "--out",
        dir.path().join("boom").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
    assert!(dir.path().join("boom/metrics.csv").is_file());
}

#[test]
fn eval_prints_metrics_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = train(dir.path(), "run", &[]);
    let args = ["eval", "--checkpoint", run.to_str().unwrap(), "--seed", "4", "--h-kde", "0.3"];
    let a = fwgan(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let line = stdout(&a);
    let keys: Vec<&str> = line.trim().split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["nll", "mmd_x1e3", "h_kde", "h_mmd"]);
    let value = |key: &str| -> f64 {
        line.split_whitespace().find_map(|kv| kv.strip_prefix(key)).unwrap().parse().unwrap()
    };
    assert_eq!(value("h_kde="), 0.3);
    assert_eq!(value("h_mmd="), 0.5);
    assert!(value("nll=").is_finite() && value("mmd_x1e3=") >= 0.0);
    assert_eq!(stdout(&fwgan(&args)), line);
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let run = train(dir.path(), "run", &[]);
    let state = run.join("checkpoint/state.json");
    let text = std::fs::read_to_string(&state).unwrap().replacen("16", "17", 1);
    std::fs::write(&state, text).unwrap();
    let o = fwgan(&["eval", "--checkpoint", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn ratio_grid_rows_and_mass() {
    let dir = tempfile::tempdir().unwrap();
    let run = train(dir.path(), "run", &[]);
    let out = dir.path().join("ratio.csv");
    let o = fwgan(&[
        "ratio", "--checkpoint", run.to_str().unwrap(), "--res", "100", "--samples", "2000",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,q_density_estimate,ratio");
    assert_eq!(lines.len(), 10_001);
    // Σ ratio · q · cell ≈ E_Q[ratio] = 1, the mass of P on the grid.
    let cell = (6.0 / 99.0) * (6.0 / 99.0);
    let mass: f64 = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            assert!(f[3] >= 0.0);
            f[2] * f[3] * cell
        })
        .sum();
    assert!((mass - 1.0).abs() < 0.1, "{mass}");
}

#[test]
fn ratio_rejects_non_2d_models() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("table.csv");
    let rows: String = (0..200).map(|i| format!("{},{},{}\n", i % 7, (i * 3) % 11, (i as f64).sin())).collect();
    std::fs::write(&csv, rows).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"dataset": {{"kind": "tabular", "path": {:?}}}, "batch_size": 32, "epochs": 1, "hidden": [8],
                 "eval_samples": 50, "divergence_batch": 16}}"#,
            csv
        ),
    );
    let run = dir.path().join("run");
    let o = fwgan(&["train", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = fwgan(&["ratio", "--checkpoint", run.to_str().unwrap(), "--out", dir.path().join("r.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2-D"));
}

#[test]
fn curves_count_negatives_and_smooth() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    std::fs::write(
        &metrics,
        "epoch,divergence,nll,mmd_x1e3\n1,0.5,,\n2,-1,,\n3,-0.25,,\n4,2,1.5,3\n5,-0.1,,\n",
    )
    .unwrap();
    let o = fwgan(&["curves", "--run", dir.path().to_str().unwrap(), "--window", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "negative_estimates=3");
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let smoothed: Vec<f64> = curve.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(smoothed, vec![0.5, -0.25, -0.625, 0.875, 0.95]);

    std::fs::write(&metrics, "epoch,divergence,nll,mmd_x1e3\n").unwrap();
    let o = fwgan(&["curves", "--run", metrics.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn print_config_round_trips() {
    let o = fwgan(&["--print-config"]);
    assert!(o.status.success());
    let c = fwgan::trainer::TrainConfig::from_json(&stdout(&o)).unwrap();
    assert_eq!(c, fwgan::trainer::TrainConfig::default());
}
