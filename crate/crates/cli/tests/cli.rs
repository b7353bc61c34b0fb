use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use piston_cli::output::read_csv;

fn piston(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piston"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = piston(args);
    assert!(
        out.status.success(),
        "piston {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every data cell of a CSV file that looks numeric must be finite.
fn assert_all_finite(path: &Path) {
    let table = read_csv(path).unwrap();
    for row in &table.rows {
        for cell in row {
            if let Ok(x) = cell.parse::<f64>() {
                assert!(x.is_finite(), "{}: {cell}", path.display());
            }
            assert!(!cell.eq_ignore_ascii_case("nan"), "{}: {cell}", path.display());
        }
    }
}

const CAPACITIVE: &str = "[circuit]
coupling = \"capacitive\"
c_tilde = 4e-13
cj_tilde = 5e-15
c_c = 1e-15
inductance = 2e-9
e_j = 1e-23
";

#[test]
fn params_reports_derived_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CAPACITIVE);
    let out = run_ok(&["params", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    let report = json(&dir.path().join("params.json"));
    for key in ["omega0", "omega_p", "g", "e_c"] {
        assert!(report["derived"][key].as_f64().unwrap() > 0.0, "{key}");
    }
    // ω_p exceeds ω₀ here: reported, not raised
    assert_eq!(report["regime_all_pass"], false);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("regime.omega_p_over_omega0.pass = false"));
    assert_eq!(text, std::fs::read_to_string(dir.path().join("params.txt")).unwrap());
}

#[test]
fn params_missing_field_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CAPACITIVE.replace("inductance = 2e-9\n", ""));
    let out = piston(&["params", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("inductance"), "{}", stderr(&out));

    let out = piston(&["params", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("circuit"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = path_str(dir.path());
    assert_eq!(code(&piston(&["pv", "--preset", "fig9", "--out", o])), 2);
    assert_eq!(code(&piston(&["pv", "--bogus"])), 2);
    assert_eq!(code(&piston(&["simulate", "--n-traj", "0", "--out", o])), 2);
    let cfg = write_config(dir.path(), "[params]\nkappa_h = 10.0\nomega0 = 5.0\n");
    let out = piston(&["pv", "--config", path_str(&cfg), "--out", o]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("omega0"));
    let cfg = write_config(dir.path(), CAPACITIVE);
    assert_eq!(code(&piston(&["simulate", "--config", path_str(&cfg), "--out", o])), 2);
    let cfg = write_config(dir.path(), "[steady_state]\npoints = 0\n");
    assert_eq!(code(&piston(&["steady-state", "--config", path_str(&cfg), "--out", o])), 2);
}

#[test]
fn steady_state_table() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["steady-state", "--preset", "fig2b", "--out", path_str(dir.path())]);
    let path = dir.path().join("steady_state.csv");
    assert_all_finite(&path);
    let table = read_csv(&path).unwrap();
    assert_eq!(table.provenance.get("preset"), Some("fig2b"));
    let kappa = table.floats("kappa_h").unwrap();
    let delta = table.floats("delta_over_kappa_h").unwrap();
    let n_a = table.floats("n_a_over_n_h").unwrap();

    let row = (0..kappa.len())
        .find(|&i| kappa[i] == 10.0 && delta[i] == -1.0)
        .expect("grid contains Δ = −κ_H");
    assert!((n_a[row] - 0.254).abs() < 1e-3, "{}", n_a[row]);

    for k in [0.1, 1.0, 10.0] {
        let curve: Vec<usize> = (0..kappa.len()).filter(|&i| kappa[i] == k).collect();
        assert_eq!(curve.len(), 201);
        for (i, j) in curve.iter().zip(curve.iter().rev()) {
            assert!((delta[*i] + delta[*j]).abs() < 1e-14);
            assert!((n_a[*i] - n_a[*j]).abs() <= 1e-12, "κ_H = {k}");
        }
        if k == 0.1 {
            // the cold bath dominates: n̄_C = 0.1 n̄_H
            assert!(curve.iter().all(|&i| (n_a[i] - 0.1).abs() < 0.05 * 0.9));
        }
    }
}

#[test]
fn pv_loops() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["pv", "--preset", "fig2d", "--out", path_str(dir.path())]);
    for name in ["pv.csv", "pv_summary.csv", "pv_stars.csv"] {
        assert_all_finite(&dir.path().join(name));
    }
    let summary = read_csv(&dir.path().join("pv_summary.csv")).unwrap();
    let tau = summary.floats("tau_omega").unwrap();
    let area = summary.floats("loop_area").unwrap();
    assert_eq!(tau, vec![0.0, 0.05, 0.1, 0.2]);
    assert!(area[0].abs() < 1e-12, "{}", area[0]);
    assert!(area.windows(2).all(|w| w[1] > w[0]), "{area:?}");

    let stars = read_csv(&dir.path().join("pv_stars.csv")).unwrap();
    assert_eq!(stars.rows.len(), 2 * tau.len());
    let col = stars.column("marker").unwrap();
    assert!(stars.rows.iter().any(|r| r[col] == "p_max"));
    assert!(stars.rows.iter().any(|r| r[col] == "p_min"));
}

#[test]
fn simulate_trivial_run() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["simulate", "--n-traj", "1", "--t-end", "0", "--out", path_str(dir.path())]);
    let traj = read_csv(&dir.path().join("trajectories.csv")).unwrap();
    assert_eq!(traj.rows.len(), 1);
    assert_eq!(traj.floats("t").unwrap(), vec![0.0]);
    assert_eq!(traj.floats("l").unwrap(), vec![0.0]);
    assert!(!dir.path().join("stats.csv").exists());
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["trajectories_completed"], 1);
    assert!(manifest["stats_skipped"].is_string());
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        // the manifest records the output directory, so all runs share one
        let out = root.path().join("out");
        run_ok(&[
            "simulate", "--n-traj", "6", "--t-end", "250", "--seed", "11", "--threads", threads, "--out",
            path_str(&out),
        ]);
        let files = files_of(&out);
        std::fs::rename(&out, root.path().join(name)).unwrap();
        files
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(
        a.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(),
        ["manifest.json", "stats.csv", "trajectories.csv"]
    );
    assert!(a == b, "rerun differs");
    assert!(a == c, "worker count changes the output");
    assert_all_finite(&root.path().join("a/stats.csv"));
    assert_all_finite(&root.path().join("a/trajectories.csv"));

    let other = root.path().join("other");
    run_ok(&["simulate", "--n-traj", "6", "--t-end", "250", "--seed", "12", "--out", path_str(&other)]);
    assert!(files_of(&other)[2] != a[2], "seed has no effect");
}

#[test]
fn analyze_flags_undefined_snr() {
    // a frozen rotor never moves, so every L is 0 and the variance vanishes
    let dir = tempfile::tempdir().unwrap();
    let o = path_str(dir.path());
    run_ok(&["simulate", "--preset", "fig2b", "--n-traj", "3", "--t-end", "300", "--dt", "0.01", "--out", o]);
    let stats = read_csv(&dir.path().join("stats.csv")).unwrap();
    assert!(stats.optional_floats("snr").unwrap().iter().all(Option::is_none));
    run_ok(&["analyze", "--preset", "fig2b", "--out", o]);
    let report = json(&dir.path().join("analysis.json"));
    assert_eq!(report["snr_undefined_samples"].as_u64().unwrap(), stats.rows.len() as u64);
    assert_eq!(report["all_pass"], false);
}

#[test]
fn analyze_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = path_str(dir.path());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# trajectories = 2\nt,mean_l\n0,abc\n").unwrap();
    let out = piston(&["analyze", "--stats", path_str(&bad), "--out", o]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(code(&piston(&["analyze", "--stats", path_str(&dir.path().join("none.csv")), "--out", o])), 2);

    // statistics produced under other parameters
    run_ok(&["simulate", "--n-traj", "2", "--t-end", "250", "--out", o]);
    let out = piston(&["analyze", "--preset", "fig2d", "--out", o]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("params."), "{}", stderr(&out));
}
