use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use volterra_cli::Config;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_volterra")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

const SCALAR: &str = r#"
experiment = "scalar_resolvent"
mu = 1.0
[kernel]
variant = "constant"
[grid]
T = 1.0
N = 1024
"#;

#[test]
fn scalar_resolvent_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&write_config(tmp.path(), SCALAR), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("scalar_resolvent.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,s");
    assert_eq!(lines.len(), 1026);
    let last: f64 = lines[1025].split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 0.367879).abs() < 1e-6);
}

#[test]
fn unknown_experiment_is_a_validation_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(
        &write_config(tmp.path(), &SCALAR.replace("scalar_resolvent", "fourier")),
        &out,
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert_eq!(stderr.trim().lines().count(), 1);
    let reason: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(reason["error"], "validation");
}

#[test]
fn unknown_key_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(
        &write_config(tmp.path(), &format!("{SCALAR}\n[extra]\nx = 1\n")),
        &out,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = run(&tmp.path().join("missing.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_parameters_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(
        &write_config(tmp.path(), &SCALAR.replace("N = 1024", "N = 1")),
        &out,
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    let bad_alpha = SCALAR.replace("variant = \"constant\"", "variant = \"fractional\"\nalpha = 3.0");
    let o = run(&write_config(tmp.path(), &bad_alpha), &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn blow_up_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = r#"
experiment = "resolvent"
quadrature = "rectangle"
[kernel]
variant = "constant"
[operator]
matrix = [[1000.0]]
[grid]
T = 1.0
N = 4000
"#;
    let o = run(&write_config(tmp.path(), text), &out, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn manifest_reruns_to_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["covariance", "verify_volterra", "cp_check"] {
        let first = tmp.path().join(format!("{name}_a"));
        let second = tmp.path().join(format!("{name}_b"));
        assert!(run(&configs().join(format!("{name}.toml")), &first, &["--seed", "5"])
            .status
            .success());
        let manifest = first.join("manifest.toml");
        let parsed = Config::parse(&fs::read_to_string(&manifest).unwrap()).unwrap();
        assert_eq!(parsed.code_version.as_deref(), Some(env!("CARGO_PKG_VERSION")));
        assert!(run(&manifest, &second, &[]).status.success());
        for entry in fs::read_dir(&first).unwrap() {
            let file = entry.unwrap().file_name();
            if file != "manifest.toml" {
                assert_eq!(
                    fs::read(first.join(&file)).unwrap(),
                    fs::read(second.join(&file)).unwrap(),
                    "{file:?}"
                );
            }
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("convolve.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &["--seed", "43"]).status.success());
    assert!(run(&cfg, &c, &["--seed", "42"]).status.success());
    let read = |d: &Path| fs::read(d.join("convolve.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
    let manifest = fs::read_to_string(b.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 43"));
}

#[test]
fn manifest_echoes_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run(&configs().join("yosida.toml"), &out, &[]).status.success());
    let m = Config::parse(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(m.quadrature.as_deref(), Some("trapezoid"));
    assert!(m.psi.unwrap().matrix.is_some());
    assert_eq!(m.noise.unwrap().truncation, Some(5));
    let header = fs::read_to_string(out.join("yosida.csv")).unwrap();
    assert!(header.starts_with("lambda,e_S,e_W,e_AW\n"));
}
