use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vaxstance(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaxstance"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn synth_then_run_succeeds_and_predict_prints_probabilities() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = vaxstance(
        &["synth", "--accounts", "120", "--signal", "0.3", "--output", "corpus"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("corpus/run.toml").exists());

    let o = vaxstance(&["--config", "corpus/run.toml", "run"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("All Windows"));
    assert!(stdout.contains("[360-450)"));
    assert!(dir.join("corpus/out/model.bin").exists());

    let o = vaxstance(
        &[
            "--config",
            "corpus/run.toml",
            "predict",
            "--tweets",
            "corpus/tweets.jsonl",
        ],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 120);
    assert!(stdout.contains("p_anti="));

    let o = vaxstance(
        &[
            "--config",
            "corpus/run.toml",
            "--format",
            "csv",
            "--output",
            "csv_out",
            "analyze",
        ],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("csv_out/frequency.csv").exists());
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&vaxstance(&["no-such-command"], tmp.path())), 1);
    assert_eq!(code(&vaxstance(&["train", "--bogus"], tmp.path())), 1);
    fs::write(tmp.path().join("bad.toml"), "nonsense_key = 3\n").unwrap();
    assert_eq!(code(&vaxstance(&["--config", "bad.toml", "train"], tmp.path())), 1);
    fs::write(tmp.path().join("dropout.toml"), "[train]\ndropout = 1.5\n").unwrap();
    assert_eq!(
        code(&vaxstance(&["--config", "dropout.toml", "build-dataset"], tmp.path())),
        1
    );
    assert_eq!(code(&vaxstance(&["--help"], tmp.path())), 0);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[paths]\ntweets = \"missing.jsonl\"\nlabels = \"labels.csv\"\n",
    )
    .unwrap();
    let o = vaxstance(&["--config", "run.toml", "build-dataset"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.jsonl"));
    let o = vaxstance(&["--config", "run.toml", "train"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples.jsonl"));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "a file, not a directory").unwrap();
    let o = vaxstance(&["--output", "blocker/out", "train"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
