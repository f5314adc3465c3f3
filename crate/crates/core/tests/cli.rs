use std::path::Path;
use std::process::Command;

use fairsel::cli::{run_cli, EXIT_OK, EXIT_USAGE};

const CONFIG: &str = r#"
seed = 4

[paths]
train = "data/train.csv"
test = "data/test.csv"
holdout = "data/holdout.csv"
out_dir = "out"

[generate]
feature_dim = 2
positive_prior = 0.4
train_size = 200
test_size = 100
holdout_size = 100

[bias]
rho = 0.3

[selector]
kind = "fair"
variant = "reducible"

[trainer]
steps = 4
checkpoint_every = 2
audit = true

[proxy]
epochs = 5
"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(std::iter::once("fairsel").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_reports_all_checks() {
    let (code, out, _) = run(&["verify", "--seed", "3"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{out}");
}

#[test]
fn full_pipeline_writes_artifacts() {
    let dir = workspace(CONFIG);
    let cfg = dir.path().join("run.toml");
    let cfg = path_str(&cfg);
    assert_eq!(run(&["gen-data", "--config", cfg]).0, EXIT_OK);
    for name in ["train", "test", "holdout"] {
        assert!(dir.path().join(format!("data/{name}.csv")).exists());
    }
    let biased = dir.path().join("data/biased.csv");
    let input = dir.path().join("data/train.csv");
    let (code, _, err) = run(&["inject-bias", "--config", cfg, "--input", path_str(&input), "--output", path_str(&biased)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(biased.exists());

    let (code, _, err) = run(&["train", "--config", cfg, "--workers", "2"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let out = dir.path().join("out");
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.lines().count() >= 2);
    assert!(out.join("audit.csv").exists());
    assert!(out.join("checkpoints/step_000002.fsel").exists());
    assert!(out.join("checkpoints/final.fsel").exists());

    let report_dir = dir.path().join("report");
    let spec = format!("fair={}", path_str(&out.join("metrics.csv")));
    let (code, _, err) = run(&["report", "--metrics", &spec, "--out-dir", path_str(&report_dir)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(report_dir.join("accuracy.svg").exists());
}

#[test]
fn sweep_writes_one_row_per_grid_cell() {
    let dir = workspace(&format!("{CONFIG}\n[sweep]\nseeds = [0]\n"));
    let cfg = dir.path().join("run.toml");
    let cfg = path_str(&cfg);
    assert_eq!(run(&["gen-data", "--config", cfg]).0, EXIT_OK);
    let (code, _, err) = run(&["sweep", "--config", cfg]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn missing_key_is_a_usage_error() {
    let dir = workspace("seed = 1\n[paths]\ntest = \"t.csv\"\n");
    let cfg = dir.path().join("run.toml");
    let (code, _, err) = run(&["train", "--config", path_str(&cfg)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("paths.train"), "{err}");
}

#[test]
fn malformed_config_names_the_line() {
    let dir = workspace("seed = 1\n\nbogus = = 3\n");
    let cfg = dir.path().join("run.toml");
    let (code, _, err) = run(&["train", "--config", path_str(&cfg)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains('3'), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fairsel");
    let status = Command::new(bin).arg("no-such-command").output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_USAGE));
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("verify"));
}
