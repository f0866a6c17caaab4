use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = aan(&["--help"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "gen-data",
        "train-reservoir",
        "extract-features",
        "train-aan",
        "eval",
        "histograms",
        "correlate",
        "sweep-outliers",
        "sweep-params",
        "ablate",
        "relational-stats",
        "learning-curves",
        "run-all",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    for flag in ["--config", "--out", "--check"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn gen_data_writes_manifest_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = aan(&["gen-data", "--kind", "nbyl_test", "--seed", "3", "--out", "nbyl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(dir.path().join("nbyl/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 600);
    assert_eq!(fs::read_dir(dir.path().join("nbyl/images")).unwrap().count(), 600);
}

#[test]
fn unknown_dataset_kind_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = aan(&["gen-data", "--kind", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "trials = 3\nno.such.key = 1\n").unwrap();
    let o = aan(&["--config", "bad.cfg", "eval"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no.such.key"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "anneal.rest.c = 1.5\n").unwrap();
    let o = aan(&["--config", "bad.cfg", "correlate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_reservoir_requires_a_pretraining_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = aan(&["gen-data", "--kind", "nbyl_test", "--out", "nbyl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = aan(&["train-reservoir", "--data", "nbyl", "--out", "model.bin"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not a pretraining set"), "{}", stderr(&o));
    assert!(!dir.path().join("model.bin").exists());
}
