use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbnm::csv_io::{read_columns, read_trajectory, DISTANCE_HEADER, SWEEP_HEADER};
use spinboson::analytic::{resummed_nonmarkovianity, weak_coupling_params};
use tempfile::TempDir;

fn sbnm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbnm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary_value(summary: &str, key: &str) -> f64 {
    let prefix = format!("\"{key}\": ");
    let line = summary
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with(&prefix))
        .unwrap_or_else(|| panic!("{key} missing in {summary}"));
    line[prefix.len()..].trim_end_matches(',').parse().unwrap()
}

fn simulate_to(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut all = vec!["simulate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path_str(&out)]);
    let o = sbnm(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn analytic_trajectory_starts_in_up_state() {
    let dir = TempDir::new().unwrap();
    let out = simulate_to(&dir, "a.csv", &["--solver", "analytic", "--alpha", "0.1", "--omega-c", "20"]);
    let traj = read_trajectory(&out).unwrap();
    assert_eq!(traj.t[0], 0.0);
    assert_eq!(traj.sz[0], 1.0);
    assert_eq!(traj.meta.solver, "analytic");
}

#[test]
fn exact_free_spin_follows_cosine() {
    let dir = TempDir::new().unwrap();
    let out = simulate_to(
        &dir,
        "free.csv",
        &["--solver", "exact", "--alpha", "0", "--omega-c", "20", "--modes", "4", "--n-exc", "1", "--t-max", "4"],
    );
    let traj = read_trajectory(&out).unwrap();
    let worst = traj
        .t
        .iter()
        .zip(&traj.sz)
        .map(|(t, z)| (z - (2.0 * t).cos()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "deviation {worst}");
}

#[test]
fn tcl2_exceeds_unit_bloch_length_at_stronger_coupling() {
    let dir = TempDir::new().unwrap();
    let out = simulate_to(
        &dir,
        "tcl2.csv",
        &["--solver", "tcl2", "--alpha", "0.3", "--omega-c", "20", "--t-max", "20", "--dt", "0.01"],
    );
    let traj = read_trajectory(&out).unwrap();
    let max_sz = traj.sz.iter().copied().fold(f64::MIN, f64::max);
    assert!(max_sz > 1.0, "max sz {max_sz}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# weak coupling\nsolver = analytic\nalpha = 0.1\nomega_c = 20\nt_max = 5\n").unwrap();
    let out = simulate_to(&dir, "a.csv", &["--config", path_str(&cfg), "--alpha", "0.2"]);
    let traj = read_trajectory(&out).unwrap();
    assert_eq!(traj.meta.get("alpha"), Some("0.2"));
    assert_eq!(traj.meta.get("t_max"), Some("5"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "solver = analytic\nalpah = 0.1\n").unwrap();
    let o = sbnm(&["simulate", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(":2:") && err.contains("alpah") && err.contains("omega_c"), "{err}");

    let o = sbnm(&["simulate", "--alpha", "0.1", "--omega-c", "20"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("exact") && err.contains("tcl2") && err.contains("analytic"), "{err}");

    let o = sbnm(&["simulate", "--solver", "analytic", "--alpha", "0.7", "--omega-c", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_exact_basis_is_a_config_error() {
    let o = sbnm(&[
        "simulate", "--solver", "exact", "--alpha", "0.1", "--omega-c", "20", "--modes", "2000", "--n-exc", "4",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("exceeds"));
}

#[test]
fn warns_about_fields_the_solver_ignores() {
    let o = sbnm(&[
        "simulate", "--solver", "analytic", "--alpha", "0.1", "--omega-c", "20", "--t-max", "1", "--modes", "10",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("n_modes"));
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["--solver", "tcl2", "--alpha", "0.1", "--omega-c", "20", "--t-max", "3", "--dt", "0.01"];
    let a = std::fs::read(simulate_to(&dir, "a.csv", &args)).unwrap();
    let b = std::fs::read(simulate_to(&dir, "b.csv", &args)).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));
}

#[test]
fn analytic_round_trip_reproduces_resummed_measure() {
    let dir = TempDir::new().unwrap();
    let traj = simulate_to(&dir, "a.csv", &["--solver", "analytic", "--alpha", "0.1", "--omega-c", "20"]);
    let dist = dir.path().join("d.csv");
    let o = sbnm(&["measure", path_str(&traj), "--out", path_str(&dist)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    let n = summary_value(&summary, "n_value");
    let p = weak_coupling_params(0.1, 20.0, 1.0).unwrap();
    let resummed = resummed_nonmarkovianity(&p).unwrap().value;
    assert!((n - resummed).abs() < 1e-4, "{n} vs {resummed}");
    assert!((n - 0.095).abs() < 0.002, "{n}");
    assert!(summary.contains("\"converged\": true"));

    let text = std::fs::read_to_string(&dist).unwrap();
    let cols = read_columns(&text, &DISTANCE_HEADER, &dist).unwrap();
    assert_eq!(cols[1][0], 1.0);
    assert!(cols[1].iter().all(|&d| (0.0..=1.0 + 1e-12).contains(&d)));
}

#[test]
fn monotone_input_gives_zero() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("mono.csv");
    let mut text = String::from("# solver = synthetic\ntime,sx,sy,sz\n");
    for k in 0..100 {
        let t = k as f64 * 0.1;
        text.push_str(&format!("{t:.8e},0,{:.8e},{:.8e}\n", -0.25 * (-0.5 * t).exp(), (-0.5 * t).exp()));
    }
    std::fs::write(&path, text).unwrap();
    let o = sbnm(&["measure", path_str(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(&stdout(&o), "n_value"), 0.0);
    assert_eq!(summary_value(&stdout(&o), "n_intervals"), 0.0);
}

#[test]
fn measure_reports_schema_violations() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "time,sx,sz\n0,0,1\n").unwrap();
    let o = sbnm(&["measure", path_str(&path)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("'sy'"), "{}", stderr(&o));

    std::fs::write(&path, "time,sx,sy,sz\n0,0,0,1\n0.1,0,0,one\n").unwrap();
    let o = sbnm(&["measure", path_str(&path)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("'sz'"), "{}", stderr(&o));

    let o = sbnm(&["measure", path_str(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn tail_flags_need_a_frequency() {
    let dir = TempDir::new().unwrap();
    let traj = simulate_to(
        &dir,
        "t.csv",
        &["--solver", "tcl2", "--alpha", "0.1", "--omega-c", "20", "--t-max", "2", "--dt", "0.01"],
    );
    let o = sbnm(&["measure", path_str(&traj), "--tail-gamma", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sbnm(&["measure", path_str(&traj), "--tail-gamma", "0.2", "--tail-frequency", "1.6"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn analytic_sweep_decreases_in_alpha_and_is_order_deterministic() {
    let dir = TempDir::new().unwrap();
    let alphas = "0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45";
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = sbnm(&[
            "sweep", "--solver", "analytic", "--alphas", alphas, "--omega-cs", "20", "--jobs", jobs, "--out",
            path_str(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out).unwrap()
    };
    let serial = run("s1.csv", "1");
    assert_eq!(serial, run("s4.csv", "4"));

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(serial.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), SWEEP_HEADER);
    let n: Vec<f64> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(n.len(), 8);
    assert!(n.windows(2).all(|w| w[1] < w[0]), "{n:?}");
}

#[test]
fn sweep_failures_stay_in_their_row() {
    let o = sbnm(&["sweep", "--solver", "analytic", "--alphas", "0.2,0.6", "--omega-c", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",ok"));
    assert!(rows[1].contains("error:"));
}

#[test]
fn empty_sweep_list_is_a_config_error() {
    let o = sbnm(&["sweep", "--solver", "analytic", "--alphas", "", "--omega-cs", "20"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn limit_output_is_scale_invariant() {
    let a = sbnm(&["limit", "--omega-c", "40"]);
    let b = sbnm(&["limit", "--omega-c", "80", "--delta", "2"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("alpha_zero_limit = "));
    assert_eq!(sbnm(&["limit", "--omega-c", "0"]).status.code(), Some(2));
}
