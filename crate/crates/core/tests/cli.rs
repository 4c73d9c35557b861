use std::path::Path;
use std::process::{Command, Output};

const SMALL_GRW: &str = r#"
seed = 5
trajectories = 64

[grid]
half_width = 1.28e-6
n_points = 128

[experiment]
kind = "grw_born"
lambda = 1.0
r_c = 1e-7
mass = 1e-15
separation = 1e-6
width = 8e-8
weight_left = 0.5
t_final = 5.0
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapse-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn same_seed_gives_identical_files_and_override_changes_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "born.toml", SMALL_GRW);
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    for name in ["a.csv", "b.csv"] {
        let o = lab(&["run", &config, "--out", &out(name), "--quiet"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
    }
    let a = std::fs::read(out("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(out("b.csv")).unwrap());

    let o = lab(&["run", &config, "--out", &out("c.csv"), "--seed", "6"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("left_fraction"));
    let c = std::fs::read_to_string(out("c.csv")).unwrap();
    assert!(c.contains("# seed: 6\n"));
    assert_ne!(a, c.as_bytes());
}

#[test]
fn default_output_sits_next_to_the_config_and_plot_script_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 1
[experiment]
kind = "dp_tau"
first = [{ shape = "sphere", mass = 1e-14, radius = 1e-6, center = [0.0, 0.0, 0.0] }]
second = [{ shape = "sphere", mass = 1e-14, radius = 1e-6, center = [0.0, 0.0, 0.0] }]
"#;
    let config = write(dir.path(), "same.toml", text);
    let o = lab(&["run", &config, "--emit-plot-script", "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("same.csv")).unwrap();
    assert!(csv.contains("tau = inf"), "{csv}");
    assert!(dir.path().join("same.plot.py").exists());
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();

    let bad_key = write(
        dir.path(),
        "bad.toml",
        &SMALL_GRW.replace("t_final = 5.0", "t_final = 5.0\ncolour = 1"),
    );
    let o = lab(&["run", &bad_key]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let bad_range = write(
        dir.path(),
        "range.toml",
        &SMALL_GRW.replace("weight_left = 0.5", "weight_left = 2.0"),
    );
    let o = lab(&["run", &bad_range]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.weight_left"));

    // A packet too narrow for the grid is a numerical failure, not a config error.
    let coarse = write(
        dir.path(),
        "coarse.toml",
        &SMALL_GRW.replace("width = 8e-8", "width = 2e-8"),
    );
    let o = lab(&["run", &coarse, "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let good = write(dir.path(), "good.toml", SMALL_GRW);
    let o = lab(&["run", &good, "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(4));
    let o = lab(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}
