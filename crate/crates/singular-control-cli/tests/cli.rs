//! End-to-end checks of the `sctl` binary: output formats, determinism,
//! exit codes and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sctl"))
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let base = r#"
[model]
mu = 0.2
sigma = 1.0
a = 0.1
c = 1.0
beta = 0.1

[model.horizon]
kind = "infinite"
t_trunc = 2.0

[sim]
t0 = 0.0
n_steps = 100
dt = 0.02
seed = 11
n_paths = 1

[law]
kind = "threshold"
boundary = 1.3536007206413314
"#;
    let path = dir.join(name);
    std::fs::write(&path, format!("{base}\n{extra}")).unwrap();
    path
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sctl-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn oracle_prints_the_free_boundary() {
    let dir = tempdir("oracle");
    let cfg = write_config(&dir, "c.toml", "");
    let out = sctl().args(["oracle", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("xhat = 1.3536007206413314e0"), "{text}");
    assert!(text.contains("lambda2 = 2.8989794855663564e-1"));
}

#[test]
fn missing_beta_is_reported_by_name_with_exit_one() {
    let dir = tempdir("missing-beta");
    let path = dir.join("bad.toml");
    std::fs::write(
        &path,
        r#"
[model]
mu = 0.2
sigma = 1.0
a = 0.1
c = 1.0
[model.horizon]
kind = "infinite"
t_trunc = 2.0
"#,
    )
    .unwrap();
    let out = sctl().args(["oracle", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("beta"), "{err}");
}

#[test]
fn oracle_grid_emits_the_requested_rows() {
    let dir = tempdir("grid");
    let cfg = write_config(&dir, "c.toml", "");
    let out_dir = dir.join("out");
    let out = sctl()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .args(["--grid", "-5:5:0.01", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("oracle_grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,V,q0,q1");
    assert_eq!(lines.len(), 1 + 1001);
}

#[test]
fn simulate_is_byte_deterministic_and_uses_the_canonical_header() {
    let dir = tempdir("sim-det");
    let cfg = write_config(&dir, "c.toml", "");
    for sub in ["a", "b"] {
        let out = sctl()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(dir.join(sub))
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("n,r_n,x_pre,x_post,y_pre,y_post,jump,cont_increment,H_bar,c_pre,c_bar\n"));
    // manifest records the artifact
    let manifest = std::fs::read_to_string(dir.join("a/manifest.toml")).unwrap();
    assert!(manifest.contains("trajectory.csv"));
    assert!(manifest.contains("config_digest"));
}

#[test]
fn multi_path_export_carries_a_path_column() {
    let dir = tempdir("sim-multi");
    let cfg = write_config(&dir, "c.toml", "");
    let out = sctl()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--paths", "3", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("out/trajectories.csv")).unwrap();
    assert!(csv.starts_with("path,n,"));
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("2,99,"));
}

#[test]
fn evaluate_reports_mean_and_stderr() {
    let dir = tempdir("eval");
    let cfg = write_config(&dir, "c.toml", "");
    let out = sctl()
        .args(["evaluate", "--config"])
        .arg(&cfg)
        .args(["--paths", "50"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("mean = "));
    assert!(text.contains("stderr = "));
    assert!(text.contains("n_paths = 50"));
}

#[test]
fn evaluate_with_second_law_compares_on_common_random_numbers() {
    let dir = tempdir("eval-crn");
    let cfg = write_config(
        &dir,
        "c.toml",
        r#"
[law2]
kind = "threshold"
boundary = 2.0
"#,
    );
    let out = sctl()
        .args(["evaluate", "--config"])
        .arg(&cfg)
        .args(["--paths", "50"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("crn diff (law2 - law1) = "), "{text}");
}

#[test]
fn pi_iterate_writes_iteration_table() {
    let dir = tempdir("pi");
    let cfg = write_config(&dir, "c.toml", "");
    let out_dir = dir.join("out");
    let out = sctl()
        .args(["pi-iterate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("pi_iterates.csv")).unwrap();
    assert!(csv.starts_with("iteration,boundary\n0,3.0000000000000000e0"));
    assert!(stdout(&out).contains("converged after"));
}

#[test]
fn learn_with_zero_episodes_emits_only_the_initial_row() {
    let dir = tempdir("learn0");
    let cfg = write_config(
        &dir,
        "c.toml",
        r#"
[learn]
algo = "td0-simplified"
episodes = 0
alphas = [0.5, 0.7, 1.8]
normalize_rates = true
[learn.schedule]
kind = "geometric"
rate = 1.055
[learn.guess]
mu = 0.1
sigma = 0.5
a = 0.08
"#,
    );
    let out_dir = dir.join("out");
    let out = sctl()
        .args(["learn", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("theta_history.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,-2.5257286443082556e0"));
    // the plot is a deterministic rendering of the same data
    let svg = std::fs::read_to_string(out_dir.join("learning.svg")).unwrap();
    assert!(svg.contains("xhat"));
}

#[test]
fn learn_with_zero_schedule_keeps_history_constant() {
    let dir = tempdir("learn-frozen");
    let cfg = write_config(
        &dir,
        "c.toml",
        r#"
[learn]
algo = "td0"
episodes = 3
alphas = [0.5, 0.7, 1.8]
normalize_rates = true
[learn.schedule]
kind = "constant"
value = 0.0
[learn.guess]
mu = 0.1
sigma = 0.5
a = 0.08
"#,
    );
    let out_dir = dir.join("out");
    let out = sctl()
        .args(["learn", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("theta_history.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    let first_theta = rows[0].split(',').skip(1).collect::<Vec<_>>().join(",");
    for row in &rows {
        assert!(row.ends_with(&first_theta));
    }
}

#[test]
fn verify_passes_on_the_stock_config_and_fails_under_injection() {
    let dir = tempdir("verify");
    let cfg = write_config(&dir, "c.toml", "\n[verify]\nn_paths = 120\n");
    let out = sctl().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 8);

    let out = sctl()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--inject", "hjb"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("FAIL hjb-residual"));

    let out = sctl()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--inject", "cost-translation"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("FAIL cost-translation"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempdir("unknown-key");
    let cfg = write_config(&dir, "c.toml", "\n[model2]\nx = 1\n");
    let out = sctl().args(["oracle", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
