use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[grid]
cells = 6
[sigma]
kind = sigmoid
sigma1 = 1
sigma2 = 3
width = 1
[boundary]
mode = electric
e = 0.5 0.25 0
psi0 = 0.1
joule = pointwise
[study]
scales = 0.1 0.3
grids = 6 8 10
";

fn thermistor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermistor"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), config).unwrap();
    dir
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn solve_writes_all_artifacts() {
    let dir = setup(SMALL);
    let out = thermistor(dir.path(), &["solve", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["diagnostics.csv", "estimates.csv", "checks.csv", "fields.vtk", "u.bin", "u.hdr", "phi.bin", "J.bin", "J.hdr"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
    let diag = read(dir.path(), "o/diagnostics.csv");
    assert!(diag.starts_with(
        "iteration,du_l2,dj_l2,contraction,u_l2,j_l2,energy_ratio,potential_iterations,temperature_iterations,linear_converged\r\n"
    ));
    let checks = read(dir.path(), "o/checks.csv");
    assert!(checks.contains("min-temperature"));
    assert!(!checks.contains(",false"));
    let u = std::fs::read(dir.path().join("o/u.bin")).unwrap();
    assert_eq!(u.len(), 8 * 7 * 7 * 7);
    assert!(String::from_utf8_lossy(&out.stdout).contains("solve: ok"));
}

#[test]
fn csv_floats_round_trip() {
    let dir = setup(SMALL);
    assert!(thermistor(dir.path(), &["solve", "--config", "run.conf", "--out", "o"]).status.success());
    let mut r = csv::Reader::from_path(dir.path().join("o/diagnostics.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let du: f64 = rec[1].parse().unwrap();
        assert_eq!(format!("{du:.17e}"), &rec[1]);
    }
}

#[test]
fn config_errors_exit_with_usage_code_and_cite_line() {
    let dir = setup(&SMALL.replace("sigma1 = 1", "sigma1 = 0"));
    let out = thermistor(dir.path(), &["solve", "--config", "run.conf"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5: [sigma].sigma1"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn incompatible_flux_is_rejected_before_solving() {
    let text = "[grid]\ncells = 4\n[sigma]\nkind = constant\nvalue = 1\n[boundary]\nmode = tangential\nflux = 1 0 0 0 0 0\n";
    let dir = setup(text);
    let out = thermistor(dir.path(), &["solve", "--config", "run.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("total"));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = thermistor(dir.path(), &["solve", "--config", "nope.conf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_sets_failure_exit() {
    let dir = setup(&format!("{SMALL}[picard]\nmax_iter = 1\n"));
    let out = thermistor(dir.path(), &["solve", "--config", "run.conf", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(read(dir.path(), "o/checks.csv").contains("picard-converged,1.00000000000000000e0,1.00000000000000000e0,false"));
}

#[test]
fn contraction_study_reports_each_scale() {
    let dir = setup(SMALL);
    let out = thermistor(dir.path(), &["contraction-study", "--config", "run.conf", "--out", "o", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let mut r = csv::Reader::from_path(dir.path().join("o/contraction.csv")).unwrap();
    let rows: Vec<_> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let factor: f64 = row[5].parse().unwrap();
        assert!(factor < 1.0);
        assert_eq!(&row[7], "true");
    }
}

#[test]
fn regularity_study_uses_configured_grids() {
    let dir = setup(SMALL);
    let out = thermistor(dir.path(), &["regularity-study", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success());
    let t = read(dir.path(), "o/regularity.csv");
    assert_eq!(t.lines().count(), 4);
    assert!(t.contains("\r\n10,"));
}

#[test]
fn reconstruct_writes_magnetic_field() {
    let dir = setup(SMALL);
    let out = thermistor(dir.path(), &["reconstruct", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("o/magnetic.vtk").exists());
    assert!(read(dir.path(), "o/H.hdr").contains("location face"));
    assert!(read(dir.path(), "o/reconstruction.csv").contains(",true\r\n"));
}

#[test]
fn verify_single_case() {
    let dir = setup(&SMALL.replace("grids = 6 8 10", "grids = 4 8 16\ncase = slab-sigma"));
    let out = thermistor(dir.path(), &["verify", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let orders = read(dir.path(), "o/orders.csv");
    assert_eq!(orders.lines().count(), 3);
    assert!(orders.lines().skip(1).all(|l| l.starts_with("slab-sigma,pointwise,")));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = setup(&format!("{SMALL}random_pairs = 200\n"));
    for (o, threads) in [("a", "1"), ("b", "3")] {
        for cmd in ["contraction-study", "regularity-study"] {
            let out = thermistor(
                dir.path(),
                &[cmd, "--config", "run.conf", "--out", &format!("{o}/{cmd}"), "--seed", "9", "--threads", threads],
            );
            assert!(out.status.success());
        }
    }
    for f in ["contraction-study/contraction.csv", "regularity-study/regularity.csv", "regularity-study/checks.csv"] {
        assert_eq!(read(dir.path(), &format!("a/{f}")), read(dir.path(), &format!("b/{f}")), "{f}");
    }
}

#[test]
fn constant_sigma_solve_takes_at_most_two_steps() {
    let text = "[grid]\ncells = 8\n[sigma]\nkind = constant\nvalue = 2\n[boundary]\nmode = electric\ne = 0.1 0 0\n";
    let dir = setup(text);
    let out = thermistor(dir.path(), &["solve", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success());
    let rows = read(dir.path(), "o/diagnostics.csv").lines().count() - 1;
    assert!((1..=2).contains(&rows), "{rows}");
}

#[test]
fn contraction_factors_grow_with_forcing() {
    let dir = setup(&SMALL.replace("scales = 0.1 0.3", "scales = 0.01 0.03 0.1 0.3 1"));
    let out = thermistor(dir.path(), &["contraction-study", "--config", "run.conf", "--out", "o"]);
    assert!(out.status.success());
    let mut r = csv::Reader::from_path(dir.path().join("o/contraction.csv")).unwrap();
    let f: Vec<f64> = r.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]), "{f:?}");
}
