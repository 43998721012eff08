use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn rcmjoint(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcmjoint"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_converges_from_reference_panels() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcmjoint(&["synth", p(&data("panelset.txt"))], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("converged      true"));
    for f in [
        "synth_report.txt",
        "synth_ratios.csv",
        "synth_optimized.txt",
        "synth_history.csv",
        "synth_result.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let optimized = fs::read_to_string(dir.path().join("synth_optimized.txt")).unwrap();
    let set = rcm_core::PanelSet::from_record_text(&optimized).unwrap();
    assert!(rcm_core::model::panel_set_index(&set).unwrap() < 1e-3);
}

#[test]
fn synth_without_iterations_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcmjoint(
        &["synth", p(&data("panelset.txt")), "--max-iters", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("idx_final"));
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "L1 = 5\nL2 = five\n").unwrap();
    let o = rcmjoint(&["synth", p(&bad)], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = rcmjoint(
        &["sweep", p(&dir.path().join("missing.cfg"))],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = rcmjoint(
        &["sweep", p(&data("best.cfg")), "--step", "7"],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_plots_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = rcmjoint(&["sweep", p(&data("best.cfg"))], a.path());
    let ob = rcmjoint(&["sweep", p(&data("best.cfg")), "--jobs", "1"], b.path());
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(ob.status.code(), Some(0));
    assert!(stdout(&oa).contains("PAR"));
    for f in [
        "sweep.csv",
        "sweep_report.txt",
        "metrics.json",
        "stiffness_polar.svg",
        "drift_polar.svg",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let csv = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 37);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "sweep");
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn coarse_sweep_skips_the_ellipse() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcmjoint(
        &["sweep", p(&data("best.cfg")), "--step", "120"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("not fitted"));
    assert!(!dir.path().join("stiffness_polar.svg").exists());
}

#[test]
fn feasibility_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["feasibility", "--n", "60", "--seed", "7"];
    assert_eq!(rcmjoint(&args, a.path()).status.code(), Some(0));
    let mut args_b = args.to_vec();
    args_b.extend(["--jobs", "2"]);
    assert_eq!(rcmjoint(&args_b, b.path()).status.code(), Some(0));
    let sa = fs::read(a.path().join("study.csv")).unwrap();
    assert_eq!(sa, fs::read(b.path().join("study.csv")).unwrap());
    assert_eq!(String::from_utf8(sa).unwrap().lines().count(), 61);

    let c = tempfile::tempdir().unwrap();
    rcmjoint(&["feasibility", "--n", "60", "--seed", "8"], c.path());
    assert_ne!(
        fs::read(a.path().join("study.csv")).unwrap(),
        fs::read(c.path().join("study.csv")).unwrap()
    );
}

#[test]
fn select_over_configs_and_study() {
    let dir = tempfile::tempdir().unwrap();
    let confs: Vec<PathBuf> = (1..=4).map(|k| data(&format!("conf{k}.cfg"))).collect();
    let mut args = vec!["select"];
    args.extend(confs.iter().map(|c| p(c)));
    let o = rcmjoint(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let best = fs::read_to_string(dir.path().join("best.cfg")).unwrap();
    rcm_core::JointConfig::from_text(&best).unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("candidates.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let study = tempfile::tempdir().unwrap();
    rcmjoint(&["feasibility", "--n", "40"], study.path());
    let o = rcmjoint(
        &["select", p(&study.path().join("study.csv"))],
        &dir.path().join("s"),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn fatigue_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcmjoint(&["fatigue", p(&data("best.cfg"))], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("workspace.csv")).unwrap();
    assert!(csv.starts_with("theta_f_deg,d_ws_mm,beta_ws_deg,beta_yield_deg"));
    assert_eq!(csv.lines().count(), 37);
    let svg = fs::read_to_string(dir.path().join("workspace_polar.svg")).unwrap();
    assert!(svg.contains("15° requirement"));
}

#[test]
fn validate_prints_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcmjoint(
        &[
            "validate",
            p(&data("bench_measurements.csv")),
            p(&data("bench_simulated.csv")),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for v in [
        "63.19",
        "73.92",
        "16.88",
        "60.15",
        "23.73",
        "5.78",
        "374.05 ± 6.14",
    ] {
        assert!(s.contains(v), "missing {v}");
    }
    let report: rcm_core::ValidationReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(report.rows.len(), 12);
    assert!(report.warnings.is_empty());
}
