use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[synth]
classes = 2
clips_per_class = 3
width = 40
height = 40
base_length = 32
groups = 2
amplitude = [5.0, 6.0]
blob_radius = [3.0, 4.0]

[fit]
pca_samples = 2000
gmm_samples = 2000

[fit.gmm]
components = 2
"#;

fn tempyr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempyr"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn full_chain_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    for stage in ["synth", "fit", "extract", "encode", "train", "eval", "stats"] {
        let o = tempyr(dir.path(), &["--config", "tiny.toml", "--out", "run", stage]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let report = std::fs::read_to_string(dir.path().join("run/reports/report.tsv")).unwrap();
    assert!(!report.is_empty());
    let o = tempyr(dir.path(), &["--config", "tiny.toml", "--out", "run", "stats"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("mtsvf"));
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "tsp_level = 9\n").unwrap();
    assert_eq!(code(&tempyr(dir.path(), &["--config", "bad.toml", "stats"])), 2);
    std::fs::write(dir.path().join("typo.toml"), "tsp_levle = 1\n").unwrap();
    assert_eq!(code(&tempyr(dir.path(), &["--config", "typo.toml", "stats"])), 2);
    assert_eq!(code(&tempyr(dir.path(), &["--config", "absent.toml", "stats"])), 2);
}

#[test]
fn missing_data_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tempyr(dir.path(), &["--out", "empty", "stats"])), 1);
    assert_eq!(code(&tempyr(dir.path(), &["--out", "empty", "encode"])), 1);
}
