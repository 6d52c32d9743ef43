use std::fs;
use std::path::Path;

use commsense::dataset::CsiDataset;
use commsense::estimator::Split;
use commsense::harness::dataset_io::{encode_dataset, sidecar_path};
use commsense::harness::{
    emit_plots, load_dataset, run_experiment, save_dataset, CsiSource, DatasetIoError, ExperimentConfig, HarnessError,
    ModelFile, Stage,
};
use commsense::lte_phy::CellConfig;
use commsense::scenario_sim::{synth_csi_dataset, ScenarioConfig};

fn small_scenario() -> ScenarioConfig {
    ScenarioConfig { snapshots_per_category: 60, ..Default::default() }
}

fn small_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        scenario: Some(small_scenario()),
        splits: vec![Split { train: 20, test: 30 }, Split { train: 40, test: 40 }],
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

fn svg_count(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count()
}

#[test]
fn dataset_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csid");
    let ds = synth_csi_dataset(&small_scenario(), &CellConfig::default()).unwrap();
    save_dataset(&ds, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.provenance.rng_seed, Some(2020));
}

#[test]
fn truncated_file_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csid");
    let ds = CsiDataset::from_rows(3, vec![(vec![1.0, 2.0, 3.0], 1), (vec![4.0, 5.0, 6.0], 2)]).unwrap();
    let bytes = encode_dataset(&ds);
    fs::write(&path, &bytes[..30]).unwrap();
    let err = load_dataset(&path).unwrap_err();
    assert!(matches!(err, DatasetIoError::Truncated { offset: 30, .. }));
    assert!(err.to_string().contains("offset 30"), "{err}");
}

#[test]
fn default_single_mode_run_writes_three_plots_and_a_complete_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_config(dir.path())).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(svg_count(dir.path()), 3);
    for name in &report.artifacts {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let run = &report.runs[0];
    assert_eq!(run.splits.len(), 2);
    assert_eq!(run.splits[0].total, 8 * 30);

    let model: ModelFile = serde_json::from_slice(&fs::read(dir.path().join(&run.model_file)).unwrap()).unwrap();
    assert_eq!(model.calibration, run.calibration);
    assert!(model.pca.normalization.is_some());

    let echoed: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let cfg: ExperimentConfig = serde_json::from_value(echoed["config"].clone()).unwrap();
    assert_eq!(cfg, small_config(dir.path()));

    let grid = fs::read_to_string(dir.path().join("accuracy_grid.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "train,test,static_day1_accuracy_percent");
    assert_eq!(grid.lines().count(), 3);
}

#[test]
fn plots_are_reproducible_and_optional() {
    let with = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_config(with.path())).unwrap();
    let first = fs::read(with.path().join("hist_static_day1.svg")).unwrap();
    emit_plots(&report, with.path());
    assert_eq!(fs::read(with.path().join("hist_static_day1.svg")).unwrap(), first);

    let without = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { emit_plots: false, ..small_config(without.path()) };
    run_experiment(&cfg).unwrap();
    assert_eq!(svg_count(without.path()), 0);
    for name in ["sweep_static_day1.csv", "scores_static_day1.csv", "confusion_static_day1_20x30.csv"] {
        assert_eq!(fs::read(with.path().join(name)).unwrap(), fs::read(without.path().join(name)).unwrap());
    }
}

#[test]
fn empty_only_scenario_fails_in_detector_and_leaves_nothing() {
    let parent = tempfile::tempdir().unwrap();
    let out = parent.path().join("out");
    let cfg = ExperimentConfig {
        scenario: Some(ScenarioConfig { categories: vec![0], snapshots_per_category: 20, ..Default::default() }),
        splits: vec![Split { train: 5, test: 5 }],
        output_dir: out.clone(),
        ..Default::default()
    };
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Stage { stage: Stage::Detector, .. }), "{err}");
    assert!(err.to_string().contains("single-class input"));
    assert_eq!(err.exit_code(), 3);
    assert!(!out.exists());
}

#[test]
fn loaded_dataset_runs_and_small_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csid");
    save_dataset(&synth_csi_dataset(&small_scenario(), &CellConfig::default()).unwrap(), &path).unwrap();

    let ok = ExperimentConfig {
        dataset: Some(path.clone()),
        splits: vec![Split { train: 20, test: 40 }],
        output_dir: dir.path().join("ok"),
        emit_plots: false,
        ..Default::default()
    };
    let report = run_experiment(&ok).unwrap();
    assert_eq!(report.runs[0].tag, "static_day1");

    let too_big =
        ExperimentConfig { splits: vec![Split { train: 30, test: 31 }], output_dir: dir.path().join("big"), ..ok };
    let err = run_experiment(&too_big).unwrap_err();
    assert!(matches!(err, HarnessError::Stage { stage: Stage::Estimator, .. }), "{err}");
    assert!(err.to_string().contains("30/31"));
    assert!(!dir.path().join("big").exists());
}

#[test]
fn iq_source_matches_direct_source_closely() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        scenario: Some(ScenarioConfig { snapshots_per_category: 24, ..Default::default() }),
        splits: vec![Split { train: 10, test: 14 }],
        emit_plots: false,
        ..Default::default()
    };
    let direct = run_experiment(&ExperimentConfig { output_dir: dir.path().join("a"), ..base.clone() }).unwrap();
    let iq = run_experiment(&ExperimentConfig { output_dir: dir.path().join("b"), csi_source: CsiSource::Iq, ..base })
        .unwrap();
    assert_eq!(iq.metadata.csi_source, CsiSource::Iq);
    let (a, b) = (&direct.runs[0], &iq.runs[0]);
    assert_eq!(a.detector_rows, b.detector_rows);
    // Both paths see the same channels; only the estimation noise differs.
    assert!((a.eigenvalues[0] - b.eigenvalues[0]).abs() < 0.2 * a.eigenvalues[0]);
}

#[test]
fn config_errors_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"splits": [{"train": 1, "test": 2}], "bogus": true}"#).unwrap();
    let err = ExperimentConfig::from_json_file(&p).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let cfg = ExperimentConfig { pca_k: 0, ..Default::default() };
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
}
