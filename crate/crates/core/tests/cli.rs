mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use tdal::cli::{
    cmd_report, cmd_run, cmd_sweep, load_series, ExperimentConfig, Failure, RunSummary, SweepAxis,
};
use tdal::cli::{MARGIN_LEFT, MARGIN_TOP, PLOT_HEIGHT, PLOT_WIDTH};

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("experiment.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdal"))
}

#[test]
fn run_writes_csvs_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_experiment(&dir.path().join("out"));
    cfg.seeds = vec![3, 4, 5, 6];
    let path = write_config(dir.path(), &cfg);
    let summary = cmd_run(&path, None, None).unwrap();
    let out = dir.path().join("out");
    for seed in &cfg.seeds {
        let text = fs::read_to_string(out.join(format!("rounds_{seed}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("round,labels,accuracy,target_count,retrained,wall_ms")
        );
        assert_eq!(lines.count(), 2);
        assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for field in ["mean_final_acc", "stderr_final_acc", "mean_target_count"] {
        assert!(json[field].is_number(), "{field}");
    }
    let parsed: RunSummary = serde_json::from_value(json).unwrap();
    assert_eq!(parsed, summary);
    let manifest: ExperimentConfig =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(manifest, cfg);
}

#[test]
fn overrides_replace_seeds_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_experiment(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let other = dir.path().join("elsewhere");
    let summary = cmd_run(&path, Some(42), Some(&other)).unwrap();
    assert_eq!(summary.seeds, vec![42]);
    assert!(other.join("rounds_42.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_are_reported_as_config_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_experiment(&dir.path().join("out"));
    cfg.seeds.clear();
    let path = write_config(dir.path(), &cfg);
    let err = cmd_run(&path, None, None).unwrap_err();
    assert!(matches!(err, Failure::Config(_)));
    assert_eq!(err.exit_code(), 1);

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        "{\n  \"dataset\": {\"kind\": \"synthetic\"},\n  \"bogus\": 1\n}",
    )
    .unwrap();
    let err = cmd_run(&bad, None, None).unwrap_err();
    assert!(err.to_string().contains("line"), "{err}");

    let good = write_config(
        dir.path(),
        &common::tiny_experiment(&dir.path().join("out")),
    );
    assert!(matches!(
        cmd_sweep(&good, SweepAxis::ImbalanceRatio, &[], None, None),
        Err(Failure::Config(_))
    ));
    assert!(matches!(
        cmd_sweep(&good, SweepAxis::RetrainPeriod, &[2.5], None, None),
        Err(Failure::Config(_))
    ));
}

#[test]
fn imbalance_sweep_writes_one_row_per_value_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_experiment(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let runs = cmd_sweep(
        &path,
        SweepAxis::ImbalanceRatio,
        &[2.0, 4.0, 6.0],
        None,
        None,
    )
    .unwrap();
    assert_eq!(runs.len(), 3);
    let text = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,seed,final_accuracy"));
    assert_eq!(lines.count(), 3 * cfg.seeds.len());
    for v in ["2", "4", "6"] {
        assert!(dir
            .path()
            .join(format!("out/imbalance_ratio_{v}/summary.json"))
            .exists());
    }
}

fn write_rounds(dir: &Path, seed: u64, accs: &[f64]) {
    fs::create_dir_all(dir).unwrap();
    let mut text = String::from("round,labels,accuracy,target_count,retrained,wall_ms\n");
    for (i, a) in accs.iter().enumerate() {
        text.push_str(&format!("{},{},{a},0,false,0\n", i + 1, 10 * (i + 1)));
    }
    fs::write(dir.join(format!("rounds_{seed}.csv")), text).unwrap();
}

/// Points of the band path as (x, y) pixel pairs.
fn band_points(svg: &str, series: &str) -> Vec<(f64, f64)> {
    let line = svg
        .lines()
        .find(|l| l.contains("class=\"band\"") && l.contains(&format!("data-series=\"{series}\"")))
        .expect("band element");
    let d = line
        .split(" d=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    d.split_whitespace()
        .filter(|t| *t != "Z")
        .map(|t| {
            let t = t.trim_start_matches(['M', 'L']);
            let (x, y) = t.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn px_to_accuracy(y: f64) -> f64 {
    1.0 - (y - MARGIN_TOP) / PLOT_HEIGHT
}

#[test]
fn report_band_matches_hand_computed_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("method");
    write_rounds(&run, 0, &[0.2, 0.5, 0.6]);
    write_rounds(&run, 1, &[0.4, 0.7, 0.8]);
    write_rounds(&run, 2, &[0.3, 0.9, 0.7]);
    let out = cmd_report(&run, None).unwrap();
    let svg = fs::read_to_string(out).unwrap();
    let pts = band_points(&svg, "method");
    assert_eq!(pts.len(), 6);
    // labels = 20 is the middle of [10, 30]
    let mid_x = MARGIN_LEFT + 0.5 * PLOT_WIDTH;
    let at_mid: Vec<f64> = pts
        .iter()
        .filter(|p| (p.0 - mid_x).abs() < 1e-3)
        .map(|p| px_to_accuracy(p.1))
        .collect();
    assert_eq!(at_mid.len(), 2);
    // mean 0.7, sample sd 0.2, stderr 0.2/√3
    let se = 0.2 / 3f64.sqrt();
    assert!((at_mid[0] - (0.7 + se)).abs() < 1e-4, "{at_mid:?}");
    assert!((at_mid[1] - (0.7 - se)).abs() < 1e-4, "{at_mid:?}");
}

#[test]
fn single_seed_and_identical_curves_have_zero_width_bands() {
    let dir = tempfile::tempdir().unwrap();
    write_rounds(&dir.path().join("a"), 0, &[0.5, 0.6]);
    for seed in 0..4 {
        write_rounds(&dir.path().join("b"), seed, &[0.3, 0.9]);
    }
    let series = load_series(dir.path()).unwrap();
    assert_eq!(series.len(), 2);
    assert!(series
        .iter()
        .all(|s| s.points.iter().all(|p| p.stderr == 0.0)));
    let out = dir.path().join("curve.svg");
    cmd_report(dir.path(), Some(&out)).unwrap();
    let svg = fs::read_to_string(out).unwrap();
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
    for name in ["a", "b"] {
        let pts = band_points(&svg, name);
        let n = pts.len();
        for i in 0..n / 2 {
            assert!((pts[i].1 - pts[n - 1 - i].1).abs() < 1e-9);
        }
    }
}

#[test]
fn ragged_or_missing_csvs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_report(dir.path(), None).is_err());
    write_rounds(dir.path(), 0, &[0.5, 0.6]);
    write_rounds(dir.path(), 1, &[0.5]);
    assert!(load_series(dir.path()).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_experiment(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let status = bin()
        .arg("run")
        .arg(&path)
        .arg("--seed-override")
        .arg("7")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bin()
        .arg("report")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("out/learning_curve.svg").exists());

    let mut empty = cfg.clone();
    empty.seeds.clear();
    let bad = dir.path().join("empty.json");
    fs::write(&bad, serde_json::to_string(&empty).unwrap()).unwrap();
    let output = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("seed"));

    let status = bin()
        .args(["sweep"])
        .arg(&path)
        .args(["--axis", "budget", "--values", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // a pool too large for the generated data fails at run time
    let mut huge = cfg.clone();
    huge.pool.pool_size = 100_000;
    let runtime = dir.path().join("huge.json");
    fs::write(&runtime, serde_json::to_string(&huge).unwrap()).unwrap();
    assert_eq!(
        bin().arg("run").arg(&runtime).status().unwrap().code(),
        Some(2)
    );
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}
