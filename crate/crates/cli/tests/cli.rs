use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn infsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infsim")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"
alpha = 0.4
n_iters = 6
snapshot_generations = [0, 6]

[grid]
x_min = -10.0
x_max = 20.0
dx = 0.01

[initial]
kind = "step"
pieces = [[-3.0, -1.0, 1.0], [4.0, 6.0, 2.0]]
"#;

#[test]
fn eigen_prints_one_row() {
    let o = infsim(&["eigen", "--alpha", "0.015"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: Vec<f64> = text.trim().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(v.len(), 6);
    assert!((v[2] - 0.9857).abs() < 5e-5 && (v[3] - 1.8897).abs() < 5e-5);
}

#[test]
fn eigen_reads_alpha_from_preset() {
    let o = infsim(&["--preset", "strong", "eigen"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("0.4,1,0.7944"));
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = infsim(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "rates.csv", "summary.csv", "eigen.csv", "profile_n0000.csv", "profile_n0006.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "n,log_mass,lambda_n,mean,variance,kl,w2,eps_mass");
    assert_eq!(traj.lines().count(), 8);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &SMALL.replace("n_iters = 6", "n_iters = 6\nunknown_key = 3"));
    let o = infsim(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));
    assert_eq!(infsim(&["simulate"]).status.code(), Some(2));
    assert_eq!(infsim(&["eigen", "--alpha", "-1"]).status.code(), Some(2));
    assert_eq!(infsim(&["--preset", "medium", "eigen"]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(infsim(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn vanishing_mass_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
alpha = 50.0
n_iters = 2

[grid]
x_min = 50.0
x_max = 60.0
dx = 0.01

[initial]
kind = "gaussian"
mu = 55.0
sigma2 = 1.0
"#;
    let cfg = small_config(tmp.path(), body);
    let o = infsim(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("generation 1"));
}

#[test]
fn oracle_and_diagnose_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = infsim(&["oracle", "--alpha", "0.4", "--sigma2", "5", "--n", "40", "--out", out]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    let var: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(var.len(), 41);
    assert!(var.windows(2).all(|w| w[1] <= w[0]));

    let o = infsim(&["diagnose", "--alpha", "0.4", "--seed", "2", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let checks = fs::read_to_string(tmp.path().join("checks.csv")).unwrap();
    assert_eq!(checks.lines().next().unwrap(), "check,lhs,rhs,slack,ok");
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn pedigree_mc_eigen_gaussian() {
    let tmp = tempfile::tempdir().unwrap();
    let o = infsim(&[
        "pedigree-mc", "--alpha", "0.4", "--n", "2", "--initial", "eigen", "--samples", "20000",
        "--seed", "5", "--grid", "-15:15:0.005", "--out", tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("pedigree_mc.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,ratio_mc,std_err,ratio_grid,abs_z");
    for l in text.lines().skip(1) {
        let z: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(z <= 3.0, "{l}");
    }
}
