use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use logodm_core::pipeline::{predict_case, run_pipeline, ModelFile, PipelineConfig, RunReport, Stage};

fn demo_config() -> PipelineConfig {
    PipelineConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo/pipeline.json")).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(listing(&path));
        }
        out.insert(path);
    }
    out
}

fn body(report: &RunReport) -> String {
    let mut r = report.clone();
    r.timings.clear();
    r.to_json_pretty()
}

#[test]
fn report_sections_are_populated() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&demo_config(), dir.path()).unwrap();
    assert!(report.target.records > 0);
    assert_eq!(report.selection.len(), 6);
    assert!(report.tree.leaves > 1);
    assert_eq!(report.evaluation.confusion_matrix.total(), report.target.records as u64);
    assert_eq!(report.evaluation.error_curve.points.len(), 12);
    assert!(!report.rules.rules.is_empty());
    assert_eq!(report.timings.len(), 7);
    for name in [
        "report.json", "report.txt", "target.csv", "target.schema.json", "model.json", "tree.json",
        "selection.json", "rules.json", "rules.txt", "evaluation.json", "curve.txt",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let last_top_level = text.rfind("\n  \"").unwrap();
    assert!(text[last_top_level..].starts_with("\n  \"timings\""));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let first_dir = tempfile::tempdir().unwrap();
    let first = run_pipeline(&demo_config(), first_dir.path()).unwrap();
    let echoed: PipelineConfig =
        serde_json::from_value(serde_json::to_value(&first.config).unwrap()).unwrap();
    let second_dir = tempfile::tempdir().unwrap();
    let second = run_pipeline(&echoed, second_dir.path()).unwrap();
    assert_eq!(body(&first), body(&second));
}

#[test]
fn writes_stay_inside_the_output_directory() {
    let data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo");
    let before = listing(&data_dir);
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("nested").join("out");
    run_pipeline(&demo_config(), &out).unwrap();
    assert_eq!(listing(&data_dir), before);
    assert!(listing(root.path()).iter().all(|p| p.starts_with(&out) || out.starts_with(p)));
}

#[test]
fn missing_input_names_the_path() {
    let mut config = demo_config();
    config.relations[1].data = PathBuf::from("/definitely/not/here.csv");
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&config, dir.path()).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert!(err.to_string().contains("/definitely/not/here.csv"));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn failing_stage_is_tagged() {
    let mut config = demo_config();
    config.k_list = Some(vec![1, 99]);
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&config, dir.path()).unwrap_err();
    assert_eq!(err.stage, Stage::Evaluate);
    assert!(err.to_string().starts_with("[evaluate]"));
}

#[test]
fn model_predicts_from_target_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&demo_config(), dir.path()).unwrap();
    let model = ModelFile::load(dir.path().join("model.json")).unwrap();
    assert_eq!(model.tree, report.tree.model);
    let predictions = predict_case(&model, &dir.path().join("target.csv")).unwrap();
    assert_eq!(predictions.len(), report.target.records);
    let labels: BTreeSet<&str> = predictions.iter().map(|p| p.label.as_str()).collect();
    assert!(labels.iter().all(|l| ["C", "I", "S"].contains(l)));
}
