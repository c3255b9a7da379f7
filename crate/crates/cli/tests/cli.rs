use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlheat_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlheat"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

const ZERO: &str = "[problem]\nhorizon = 0.1\n[weight]\npieces = [[1.0]]\n[grid]\nxs = [0.25, 0.5]\nts = [0.05, 0.1]\n";

#[test]
fn shipped_configs_round_trip() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
    }
}

#[test]
fn full_config_round_trips() {
    let text = r#"
[problem]
horizon = 0.3

[weight]
atoms = [[0.0, 0.5], [0.37, 0.25]]

[signals.q0]
breakpoints = [0.0, 0.1, 1.0]
pieces = [[0.1, 0.2, 0.30000000000000004], [1e-17]]

[contour]
radius = 2.5
max_abs_lambda = 500.0
panels_per_unit = 3
panel_order = 12
tail_tolerance = 1e-10
chirp_time = 0.0

[grid]
xs = { start = 0.1, stop = 0.9, count = 7 }
ts = [0.01, 0.2]
tau = "PerPoint"

[outputs]
csv = "out.csv"
tolerance = 1e-4

[compare]
m_list = [5, 10]
j_list = [7]
"#;
    let cfg = RunConfig::parse(text).unwrap();
    assert_eq!(cfg.grid.xs.points().len(), 7);
    assert_eq!(cfg.compare.fd_refinements, 4);
    let again = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(again.to_toml(), cfg.to_toml());
}

#[test]
fn unknown_fields_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.toml", &format!("{ZERO}[grid2]\nx = 1\n"));
    let out = run(&["solve", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn zero_data_gives_zero_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "z.toml", ZERO);
    let out = run(&["solve", "--config", p.to_str().unwrap()]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 4);
    for row in r {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn steady_state_column_is_constant_and_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("steady.toml");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for f in [&a, &b] {
        let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", f.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let r = rows(std::str::from_utf8(&ta).unwrap());
    assert_eq!(r.len(), 15);
    for row in r {
        assert!((row[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn constant_weight_bound_is_log_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "k1.toml", ZERO);
    let out = run(&["bound", "--config", p.to_str().unwrap()]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    let get = |k: &str| r.iter().find(|x| x[0] == k).unwrap()[1].clone();
    assert!((get("m").parse::<f64>().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(get("zeros_outside_strip"), "0");
    // Δ = sin λ / λ: zeros ±π, …, ±6π below |Re λ| = 20
    assert_eq!(get("zeros_in_strip"), "12");
}

#[test]
fn hypothesis_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "h.toml", &ZERO.replace("pieces = [[1.0]]", "pieces = [[0.0, 1.0]]"));
    for cmd in ["bound", "solve"] {
        let out = run(&[cmd, "--config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
    }
}

#[test]
fn parse_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", "[problem]\nhorizon = \"soon\"\n");
    assert_eq!(run(&["verify", "--config", p.to_str().unwrap()]).status.code(), Some(4));
    let p = write(dir.path(), "bad2.toml", &ZERO.replace("pieces = [[1.0]]", "pieces = [[1.0], [2.0]]"));
    assert_eq!(run(&["solve", "--config", p.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn verify_passes_and_under_truncation_fails() {
    let cfg = configs().join("linear_weight.toml");
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--max-lambda", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation"));
}

#[test]
fn zero_data_compares_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "z.toml", ZERO);
    for mode in ["oracle", "dirichlet-limit"] {
        let out = run(&["compare", "--config", p.to_str().unwrap(), "--mode", mode, "--j-list", "10,20"]);
        assert!(out.status.success(), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        let r = rows(&String::from_utf8(out.stdout).unwrap());
        let col = if mode == "oracle" { 3 } else { 1 };
        assert!(r.iter().all(|row| row[col].parse::<f64>().unwrap() == 0.0), "{mode}: {r:?}");
    }
}

#[test]
fn dirichlet_sweep_decreases() {
    let cfg = configs().join("dirichlet.toml");
    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--mode", "dirichlet-limit"]);
    assert!(out.status.success());
    let d: Vec<f64> = rows(&String::from_utf8(out.stdout).unwrap()).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(d.len(), 3);
    assert!(d[0] > d[1] && d[1] > d[2]);
}

#[test]
fn oracle_agrees_on_box_scenario() {
    let cfg = configs().join("box.toml");
    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--mode", "oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--mode", "oracle", "--tol", "1e-6"]);
    assert_eq!(out.status.code(), Some(3));
}
