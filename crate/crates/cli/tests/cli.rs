use std::path::Path;
use std::process::Command;

use paraxial_cli::{load_config, parse_config, ConfigError, Preset, DIGEST_FILE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, MANIFEST_FILE};

fn paraxial(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_paraxial")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL_KZK: &str = r#"
model = "kzk"

[params]
eps = 0.1
nu = 0.01

[grid]
axes = [{ name = "y", n = 16, length = 8.0 }, { name = "tau", n = 32, length = 1.0 }]

[march]
end = 0.1
step = 0.01
"#;

#[test]
fn misspelled_key_is_named_in_the_parse_error() {
    let err = parse_config("[params]\ngamm = 1.4\n", Preset::Nondim).unwrap_err();
    match err {
        ConfigError::Parse(msg) => assert!(msg.contains("gamm"), "{msg}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn increasing_eps_list_is_rejected() {
    let err = parse_config("[experiment]\neps_list = [0.1, 0.2]\n", Preset::Nondim).unwrap_err();
    assert!(matches!(err, ConfigError::Validation { .. }), "{err:?}");
    assert!(err.to_string().contains("eps list not decreasing"), "{err}");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let err = load_config("/definitely/not/here.toml", Preset::Nondim).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}

#[test]
fn profile_period_must_match_the_tau_axis() {
    let text = SMALL_KZK.replace("length = 1.0", "length = 2.0");
    assert!(matches!(parse_config(&text, Preset::Nondim), Err(ConfigError::Validation { .. })));
}

#[test]
fn unknown_subcommand_exits_with_usage_code() {
    assert_eq!(paraxial(&["frobnicate"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(paraxial(&["--help"]).status.code(), Some(EXIT_OK));
}

#[test]
fn bad_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[params]\ngamm = 1.4\n");
    let out = paraxial(&["solve-kzk", "--config", &cfg, "--out", &dir.path().join("out").display().to_string()]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamm"));
}

#[test]
fn kzk_solve_writes_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "kzk.toml", SMALL_KZK);
    let out_dir = dir.path().join("out");
    let out = paraxial(&["solve-kzk", "--config", &cfg, "--out", &out_dir.display().to_string()]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join(DIGEST_FILE).exists());
    assert!(out_dir.join("I_00000.ac1").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve-kzk");
    let first = paraxial_core::snapshot::load(out_dir.join("I_00000.ac1")).unwrap();
    assert_eq!(first.len(), 16 * 32);
}

#[test]
fn kzk_blow_up_exits_with_numerical_code_and_saves_last_state() {
    let dir = tempfile::tempdir().unwrap();
    // A step far above the diffusive stability limit.
    let text = SMALL_KZK.replace("nu = 0.01", "nu = 2.0").replace("end = 0.1", "end = 5.0").replace("step = 0.01", "step = 0.05");
    let cfg = write(dir.path(), "unstable.toml", &text);
    let out_dir = dir.path().join("out");
    let out = paraxial(&["solve-kzk", "--config", &cfg, "--out", &out_dir.display().to_string()]);
    assert_eq!(out.status.code(), Some(EXIT_NUMERICAL));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("last good z"), "{stderr}");
    assert!(out_dir.join("last_good.ac1").exists());
}

#[test]
fn output_dir_of_another_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out").display().to_string();
    let a = write(dir.path(), "a.toml", SMALL_KZK);
    let b = write(dir.path(), "b.toml", &SMALL_KZK.replace("eps = 0.1", "eps = 0.05"));
    assert_eq!(paraxial(&["solve-kzk", "--config", &a, "--out", &out_dir]).status.code(), Some(EXIT_OK));
    let second = paraxial(&["solve-kzk", "--config", &b, "--out", &out_dir]);
    assert_eq!(second.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&second.stderr).contains("refusing"));
    // The same config may reuse its own directory.
    assert_eq!(paraxial(&["solve-kzk", "--config", &a, "--out", &out_dir]).status.code(), Some(EXIT_OK));
}

#[test]
fn convergence_command_reports_fourth_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "conv.toml", "[convergence]\nstudy = \"npe-rk4\"\nresolutions = [8, 16, 32]\n");
    let out_dir = dir.path().join("out");
    let out = paraxial(&["convergence", "--config", &cfg, "--out", &out_dir.display().to_string()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("resolution,error,order\n"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("observed order 4.0"));
}
