use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use opinion_sim::analysis::{self, Parameter};
use opinion_sim::indicators::{Group, Indicator};
use opinion_sim::io;
use opinion_sim::sweep::{self, ParameterGrid};

const GRID: &str = "[grid]\nepsilon = [0.2, 0.6]\nx_llm = [-0.5, 1.0]\nproportion_step = 0.25\nn = 40\nt = 40\n";

fn sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opinion-sim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sim(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_sweep(dir: &Path, extra: &[&str]) {
    fs::write(dir.join("grid.toml"), GRID).unwrap();
    let args = [&["sweep", "--grid", "grid.toml", "--repeats", "3", "--seed", "5"][..], extra].concat();
    ok(dir, &args);
}

#[test]
fn sweep_file_matches_library_results() {
    let dir = tempfile::tempdir().unwrap();
    small_sweep(dir.path(), &[]);
    let (header, rows) = io::read_summary(&dir.path().join("summary.csv")).unwrap();
    let header = header.unwrap();
    assert_eq!(header.seed, 5);
    assert_eq!(header.command, "sweep");

    let grid = ParameterGrid {
        epsilon: vec![0.2, 0.6],
        x_llm: vec![-0.5, 1.0],
        proportion_step: 0.25,
        n: 40,
        t: 40,
        ..ParameterGrid::default()
    };
    let combos = sweep::run_sweep(&grid, 3, 5, 2).unwrap();
    let expected = analysis::summary_rows(&combos);
    assert_eq!(rows.len(), expected.len());
    assert_eq!(rows.len(), 2 * 2 * 15 * 4);
    for (got, want) in rows.iter().zip(&expected) {
        for p in Parameter::EVERY {
            assert_eq!(got.parameter(p), want.parameter(p));
        }
        assert_eq!(got.set.group, want.set.group);
        for ind in Indicator::EVERY {
            assert_eq!(got.set.get(ind), want.set.get(ind).map(io::quantize), "{ind:?}");
        }
    }
}

#[test]
fn analysis_commands_consume_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    small_sweep(dir.path(), &[]);
    ok(dir.path(), &["correlate", "--input", "summary.csv"]);
    ok(dir.path(), &["extremes", "--input", "summary.csv", "--k", "3"]);
    let out = ok(dir.path(), &["extreme-strategies", "--input", "summary.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ratio"));

    let corr = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    assert!(corr.starts_with("# tool=opinion-sim"));
    assert_eq!(corr.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5 * 4 * 4);
    let nil_rows: Vec<_> = corr.lines().filter(|l| l.contains(",NIL,")).collect();
    assert_eq!(nil_rows.len(), 20);
    assert!(nil_rows.iter().all(|l| l.contains("nan")), "{nil_rows:?}");

    let extremes = fs::read_to_string(dir.path().join("extremes.csv")).unwrap();
    assert_eq!(extremes.lines().filter(|l| !l.starts_with('#')).count(), 1 + Indicator::EVERY.len() * 2);
    assert!(dir.path().join("strategy_families.csv").exists());
    assert!(dir.path().join("strategy_tests.csv").exists());
}

#[test]
fn json_output_is_one_object_per_line() {
    let dir = tempfile::tempdir().unwrap();
    small_sweep(dir.path(), &["--format", "json"]);
    let text = fs::read_to_string(dir.path().join("summary.jsonl")).unwrap();
    let mut lines = text.lines();
    let first: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(first["meta"]["seed"], 5);
    assert_eq!(first["columns"].as_array().unwrap().len(), 13);
    let rows: Vec<serde_json::Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 240);
    assert!(rows.iter().all(|r| r.get("node_sd").is_some()));

    let (_, csv_rows) = {
        small_sweep(dir.path(), &[]);
        io::read_summary(&dir.path().join("summary.csv")).unwrap()
    };
    let (_, json_rows) = io::read_summary(&dir.path().join("summary.jsonl")).unwrap();
    assert_eq!(csv_rows.len(), json_rows.len());
    for (c, j) in csv_rows.iter().zip(&json_rows) {
        assert_eq!(c.set.node_sd, j.set.node_sd.map(io::quantize));
    }
}

#[test]
fn rerunning_a_finished_sweep_leaves_it_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    small_sweep(dir.path(), &["--chunk", "7"]);
    let first = fs::read(dir.path().join("summary.csv")).unwrap();
    small_sweep(dir.path(), &["--chunk", "7"]);
    assert_eq!(first, fs::read(dir.path().join("summary.csv")).unwrap());
}

#[test]
fn run_writes_series_trajectory_and_graphs() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["run", "--repeats", "2", "--trajectory", "--graph", "--events", "off"]);
    let series = io::read_series_csv(&dir.path().join("series.csv")).unwrap();
    assert_eq!(series.len(), 101);
    assert_eq!(series[0].mean_abs_change, 0.0);
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 101 * 100);
    for r in 0..2 {
        let edges = fs::read_to_string(dir.path().join(format!("graph_{r}.edges"))).unwrap();
        assert!(edges.lines().count() > 99);
    }
    let indicators = fs::read_to_string(dir.path().join("indicators.csv")).unwrap();
    assert_eq!(indicators.lines().filter(|l| !l.starts_with('#')).count(), 1 + Group::EVERY.len());
}

#[test]
fn intervene_and_presets_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["intervene", "--repeats", "3", "--kinds", "opposite,neutral"]);
    let table = fs::read_to_string(dir.path().join("intervention.csv")).unwrap();
    let rows: Vec<_> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("none"));
    ok(dir.path(), &["presets"]);
    let presets = fs::read_to_string(dir.path().join("presets.csv")).unwrap();
    assert_eq!(presets.lines().filter(|l| !l.starts_with('#')).count(), 1 + sweep::scenario_presets().len());
}

#[test]
fn errors_name_their_cause_and_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[scenario]\nepsilonn = 0.3\n").unwrap();
    let out = sim(dir.path(), &["--config", "bad.toml", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.epsilonn"));

    let out = sim(dir.path(), &["run", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("junk.csv"), "a,b\n1,2\n").unwrap();
    let out = sim(dir.path(), &["correlate", "--input", "junk.csv"]);
    assert_eq!(out.status.code(), Some(4));

    let out = sim(dir.path(), &["correlate", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(5));
}
