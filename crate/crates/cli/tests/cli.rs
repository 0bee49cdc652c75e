//! CLI behavior: exit codes, error reporting, and seeded sampling.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjtk"))
}

fn write_config(name: &str, body: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn malformed_expression_exits_3_with_offset() {
    let cfg = write_config(
        "hjtk_malformed.toml",
        r#"
[system]
type = "hamiltonian"
n = 1
H = "q1 +"

[solution]
alpha = ["1"]

[check]
grid = [[-1.0, 1.0, 3]]
"#,
    );
    let out = bin()
        .arg("check-hj")
        .arg(&cfg)
        .arg("--out")
        .arg(std::env::temp_dir().join("hjtk_malformed_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("syntax error") && stderr.contains("offset 4"),
        "stderr: {stderr}"
    );
}

#[test]
fn unknown_identifier_exits_3() {
    let cfg = write_config(
        "hjtk_unknown_ident.toml",
        r#"
[system]
type = "hamiltonian"
n = 1
H = "p1^2/2 + foo"

[solution]
alpha = ["1"]

[check]
grid = [[-1.0, 1.0, 3]]
"#,
    );
    let out = bin()
        .arg("check-hj")
        .arg(&cfg)
        .arg("--out")
        .arg(std::env::temp_dir().join("hjtk_unknown_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));
}

#[test]
fn missing_grid_axes_exit_3() {
    let cfg = write_config(
        "hjtk_bad_grid.toml",
        r#"
[system]
type = "hamiltonian"
n = 1
H = "p1^2/2"

[solution]
alpha = ["l"]
params = ["l"]

[check]
grid = [[-1.0, 1.0, 3]]
"#,
    );
    let status = bin()
        .arg("check-hj")
        .arg(&cfg)
        .arg("--out")
        .arg(std::env::temp_dir().join("hjtk_bad_grid_out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn seeded_random_samples_are_reproducible() {
    let cfg = write_config(
        "hjtk_seeded.toml",
        r#"
[system]
type = "hamiltonian"
n = 1
H = "(p1^2 + q1^2)/2"

[solution]
alpha = ["sqrt(2*1.5 - q1^2)"]

[check]
grid = [[-0.5, 0.5, 3]]
tolerance = 1e-8
samples = 25
seed = 99
"#,
    );
    let mut reports = Vec::new();
    for run in 0..2 {
        let out_dir = std::env::temp_dir().join(format!("hjtk_seeded_out_{run}"));
        let status = bin()
            .arg("check-hj")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .arg("--quiet")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        reports.push(fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].clone()).unwrap();
    assert!(text.contains("\"seed\": 99"));
    assert!(text.contains("\"prng\": \"splitmix64\""));
    // The grid contributes 3 samples per check; the extras make 28.
    assert!(text.contains("\"n_samples\": 28"));
}

#[test]
fn reconstruct_writes_trajectory_csvs() {
    let out_dir = std::env::temp_dir().join("hjtk_rec_csv");
    let status = bin()
        .arg("reconstruct")
        .arg(
            std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../configs/oscillator_reconstruct.toml"),
        )
        .arg("--out")
        .arg(&out_dir)
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["base.csv", "lifted.csv", "direct.csv", "report.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let base = fs::read_to_string(out_dir.join("base.csv")).unwrap();
    let mut lines = base.lines();
    assert_eq!(lines.next(), Some("t,x1"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,"), "first row: {first}");
}

#[test]
fn tolerance_override_flips_verdict() {
    // The constant section fails at 1e-8 but passes at a huge tolerance.
    let cfg = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/oscillator_alpha_const.toml");
    let fail = bin()
        .arg("check-hj")
        .arg(&cfg)
        .arg("--out")
        .arg(std::env::temp_dir().join("hjtk_tol_a"))
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(fail.code(), Some(1));
    let pass = bin()
        .arg("check-hj")
        .arg(&cfg)
        .arg("--out")
        .arg(std::env::temp_dir().join("hjtk_tol_b"))
        .arg("--tolerance")
        .arg("10.0")
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(pass.code(), Some(0));
}
