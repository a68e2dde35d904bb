use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use qpnn::{ObjectiveKind, TaskName};
use qpnn_lab::config::ExperimentConfig;
use qpnn_lab::experiment::{run_experiment, RunOptions};
use qpnn_lab::stats::PLATEAU_GAP_DECADES;
use qpnn_lab::store::{RecordKind, Store};
use qpnn_lab::summary::{lookup, summarize, write_summary_csv, NO_SUCCESS};

fn config(dir: &Path, trials: usize, alphas: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        task: TaskName::Bsa,
        layer_range: vec![2],
        alpha_list: alphas,
        varphi_list: vec![PI],
        trials,
        base_seed: 11,
        objective_kind: ObjectiveKind::Unconditional,
        output_dir: dir.to_path_buf(),
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn two_trial_cell_writes_expected_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 2, vec![0.3]);
    let records = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let count = |k: RecordKind| records.iter().filter(|r| r.kind == k).count();
    assert_eq!(count(RecordKind::InSitu), 2);
    assert_eq!(count(RecordKind::Offline), 2);
    assert_eq!(count(RecordKind::LossLimit), 1);
    assert_eq!(count(RecordKind::Ideal), 1);
    assert_eq!(Store::new(tmp.path()).load_all().unwrap().len(), 6);

    let text = fs::read_to_string(Store::new(tmp.path()).path_for(RecordKind::InSitu, &cfg.cells()[0], Some(0))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let amp = &v["outputs"][0][0];
    assert!(amp.is_array() && amp.as_array().unwrap().len() == 2);
    assert_eq!(v["outputs"].as_array().unwrap().len(), 4);
    assert_eq!(v["task"]["truth_table"][0][0], "Phi+");
}

#[test]
fn reruns_are_idempotent_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_experiment(&config(a.path(), 3, vec![0.3]), &RunOptions::default()).unwrap();
    let before = snapshot(a.path());
    let again = run_experiment(&config(a.path(), 3, vec![0.3]), &RunOptions::default()).unwrap();
    assert_eq!(before, snapshot(a.path()));
    assert_eq!(first, again);

    // Fresh store, different worker count: identical metrics.
    let parallel = run_experiment(&config(b.path(), 3, vec![0.3]), &RunOptions { jobs: 3, ..Default::default() }).unwrap();
    let strip = |rs: &[qpnn_lab::TrialRecord]| -> Vec<_> { rs.iter().map(|r| (r.kind, r.trial, r.seed, r.metrics.clone())).collect() };
    assert_eq!(strip(&first), strip(&parallel));
}

#[test]
fn partial_store_is_resumed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 3, vec![0.3]);
    let full = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let store = Store::new(tmp.path());
    fs::remove_file(store.path_for(RecordKind::InSitu, &cfg.cells()[0], Some(1))).unwrap();
    let resumed = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(full, resumed);
}

#[test]
fn summary_rows_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 4, vec![0.0, 0.3]);
    let records = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let summary = summarize(&records, &cfg, PLATEAU_GAP_DECADES);
    assert!(summary.missing.is_empty());
    let cells = cfg.cells();
    let ideal = records.iter().find(|r| r.kind == RecordKind::Ideal).unwrap();
    assert_eq!(lookup(&summary.rows, &cells[0], "loss_limit"), Some(ideal.metrics.f_unc));
    for row in &summary.rows {
        assert_eq!(row.n_trials, 4);
        if let (Some(lo), Some(m), Some(hi)) = (row.ci_low, row.mean, row.ci_high) {
            assert!(lo <= m && m <= hi, "{row:?}");
        }
    }

    let path = tmp.path().join("summary.csv");
    write_summary_csv(&summary.rows, &path).unwrap();
    let header = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "task,layers,alpha_wg_db_cm,varphi_rad,metric,mean,ci_low,ci_high,n_success,n_trials,plateau_n");

    // Drop every in-situ trial of one cell below any threshold.
    let mut doctored = records.clone();
    for r in doctored.iter_mut().filter(|r| r.kind == RecordKind::InSitu && r.cell == cells[1]) {
        r.metrics.f_unc = 0.0;
    }
    let s = summarize(&doctored, &cfg, PLATEAU_GAP_DECADES);
    let flagged: Vec<_> = s.rows.iter().filter(|r| r.metric == NO_SUCCESS).collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!(flagged[0].alpha_wg_db_cm, 0.3);
    assert_eq!(flagged[0].mean, None);

    // Missing cells are reported, not filled in.
    let partial: Vec<_> = records.into_iter().filter(|r| r.cell != cells[1]).collect();
    let s = summarize(&partial, &cfg, PLATEAU_GAP_DECADES);
    assert_eq!(s.missing.len(), 1);
    assert!(s.rows.iter().all(|r| r.alpha_wg_db_cm == 0.0));
}
