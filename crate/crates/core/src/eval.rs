//! Stratified k-fold cross-validation, pooled confusion matrices and the
//! error-versus-feature-count curve. Feature selection always runs on the
//! training part of a fold only.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::CodedColumn;
use crate::rng::Stream;
use crate::schema::Dataset;
use crate::select::{mrmr_select, SelectionTrace};
use crate::tree::{induce_tree, DecisionTree, TreeParams};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits record indices into `folds` stratified partitions.
///
/// Each class stratum (in declared domain order) is shuffled with the seeded
/// stream, then dealt round-robin with a counter that carries over between
/// strata, so per-class fold counts differ by at most one.
pub fn stratified_kfold(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Parameter(format!("folds must be at least 2, got {folds}")));
    }
    let class_name = ds
        .schema()
        .class_attribute()
        .ok_or_else(|| Error::Schema("stratification needs a class attribute".into()))?;
    let class = CodedColumn::from_dataset(ds, class_name)?;
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); class.cardinality()];
    for (i, &c) in class.codes().iter().enumerate() {
        strata[c as usize].push(i);
    }
    let labels = ds.schema().class_descriptor().expect("class exists").domain();
    let present = strata.iter().filter(|s| !s.is_empty()).count();
    if present < 2 {
        return Err(Error::InsufficientData(format!(
            "stratified folds need at least 2 observed classes, found {present}"
        )));
    }
    for (label, stratum) in labels.iter().zip(&strata) {
        if !stratum.is_empty() && stratum.len() < folds {
            return Err(Error::InsufficientData(format!(
                "class `{label}` has {} records, fewer than {folds} folds",
                stratum.len()
            )));
        }
    }

    let mut stream = Stream::new(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let mut slot = 0usize;
    for stratum in strata.iter_mut() {
        stream.shuffle(stratum);
        for &i in stratum.iter() {
            tests[slot % folds].push(i);
            slot += 1;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; ds.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..ds.len()).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Square count matrix: rows are true classes, columns predicted classes,
/// both in declared domain order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Schema(format!("label `{label}` is not a class")))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let (t, p) = (self.index(truth)?, self.index(predicted)?);
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn error(&self) -> f64 {
        1.0 - self.accuracy()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Per-class recall; `None` for classes with no true records.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.row_sums()
            .iter()
            .enumerate()
            .map(|(i, &n)| (n > 0).then(|| self.counts[i][i] as f64 / n as f64))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>10}", "true\\pred");
        for l in &self.labels {
            let _ = write!(out, " {l:>8}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(out, "{l:>10}");
            for c in row {
                let _ = write!(out, " {c:>8}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "accuracy {:.4}  error {:.4}", self.accuracy(), self.error());
        out
    }
}

/// Model trained on one fold's training indices.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldModel {
    pub selection: Option<SelectionTrace>,
    pub features: Vec<String>,
    pub tree: DecisionTree,
}

/// Trains on `train` only: optional mRMR selection of `k` features, then a tree.
pub fn train_fold(
    ds: &Dataset,
    train: &[usize],
    k: Option<usize>,
    params: &TreeParams,
) -> Result<FoldModel> {
    let train_ds = ds.subset(train);
    let (selection, features) = match k {
        Some(k) => {
            let trace = mrmr_select(&train_ds, k)?;
            let features: Vec<String> = trace.attributes().iter().map(|s| s.to_string()).collect();
            (Some(trace), features)
        }
        None => (
            None,
            ds.schema()
                .feature_names()
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ),
    };
    let names: Vec<&str> = features.iter().map(String::as_str).collect();
    let tree = induce_tree(&train_ds.with_features(&names)?, params)?;
    Ok(FoldModel {
        selection,
        features,
        tree,
    })
}

fn score_fold(ds: &Dataset, tree: &DecisionTree, test: &[usize]) -> Result<ConfusionMatrix> {
    let schema = ds.schema();
    let class_idx = schema.class_index().expect("class exists");
    let labels = schema.class_descriptor().expect("class exists").domain().to_vec();
    let mut cm = ConfusionMatrix::new(labels);
    for &i in test {
        let record = &ds.records()[i];
        let truth = record[class_idx]
            .as_category()
            .ok_or_else(|| Error::UnimputedData(schema.attributes()[class_idx].name().into()))?;
        let predicted = tree.predict(record, schema)?;
        cm.record(truth, &predicted.label)?;
    }
    Ok(cm)
}

/// Pools test predictions over the given folds; `k` enables in-fold selection.
pub fn evaluate_on_folds(
    ds: &Dataset,
    folds: &[Fold],
    k: Option<usize>,
    params: &TreeParams,
) -> Result<ConfusionMatrix> {
    let per_fold = folds
        .par_iter()
        .map(|fold| {
            let model = train_fold(ds, &fold.train, k, params)?;
            score_fold(ds, &model.tree, &fold.test)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = ds
        .schema()
        .class_descriptor()
        .ok_or_else(|| Error::Schema("evaluation needs a class attribute".into()))?
        .domain()
        .to_vec();
    let mut pooled = ConfusionMatrix::new(labels);
    for cm in &per_fold {
        pooled.merge(cm);
    }
    Ok(pooled)
}

pub fn evaluate_classifier(
    ds: &Dataset,
    params: &TreeParams,
    folds: usize,
    seed: u64,
) -> Result<ConfusionMatrix> {
    params.validate()?;
    let folds = stratified_kfold(ds, folds, seed)?;
    evaluate_on_folds(ds, &folds, None, params)
}

/// Cross-validated evaluation with mRMR selection of `k` features in each fold.
pub fn evaluate_with_selection(
    ds: &Dataset,
    k: usize,
    params: &TreeParams,
    folds: usize,
    seed: u64,
) -> Result<ConfusionMatrix> {
    params.validate()?;
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let folds = stratified_kfold(ds, folds, seed)?;
    evaluate_on_folds(ds, &folds, Some(k), params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_error: f64,
    /// Sample standard deviation across folds.
    pub std_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    /// Feature count with the lowest mean error; ties go to the smaller count.
    pub fn argmin(&self) -> Option<usize> {
        self.points
            .iter()
            .min_by(|a, b| a.mean_error.total_cmp(&b.mean_error).then(a.k.cmp(&b.k)))
            .map(|p| p.k)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("k\tmean_error\tstd_error\n");
        for p in &self.points {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}", p.k, p.mean_error, p.std_error);
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_k_values(ds: &Dataset, k_values: &[usize]) -> Result<Vec<usize>> {
    if k_values.is_empty() {
        return Err(Error::Parameter("k list is empty".into()));
    }
    if k_values.contains(&0) {
        return Err(Error::Parameter("feature counts must be at least 1".into()));
    }
    let available = ds.schema().feature_names().len();
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let max = *ks.last().expect("non-empty");
    if max > available {
        return Err(Error::Parameter(format!(
            "k = {max} exceeds the {available} available features"
        )));
    }
    Ok(ks)
}

/// Error curve over explicit folds. Each fold runs selection once with the
/// largest k and reads smaller selections off the greedy prefix.
pub fn error_curve_on_folds(
    ds: &Dataset,
    k_values: &[usize],
    params: &TreeParams,
    folds: &[Fold],
) -> Result<ErrorCurve> {
    params.validate()?;
    let ks = check_k_values(ds, k_values)?;
    let max_k = *ks.last().expect("non-empty");
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|fold| {
            let train_ds = ds.subset(&fold.train);
            let trace = mrmr_select(&train_ds, max_k)?;
            ks.iter()
                .map(|&k| {
                    let names = &trace.attributes()[..k];
                    let tree = induce_tree(&train_ds.with_features(names)?, params)?;
                    Ok(score_fold(ds, &tree, &fold.test)?.error())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let points = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let errors: Vec<f64> = per_fold.iter().map(|f| f[j]).collect();
            let (mean_error, std_error) = mean_std(&errors);
            CurvePoint {
                k,
                mean_error,
                std_error,
            }
        })
        .collect();
    Ok(ErrorCurve { points })
}

pub fn error_vs_feature_count(
    ds: &Dataset,
    k_values: &[usize],
    params: &TreeParams,
    folds: usize,
    seed: u64,
) -> Result<ErrorCurve> {
    check_k_values(ds, k_values)?;
    let folds = stratified_kfold(ds, folds, seed)?;
    error_curve_on_folds(ds, k_values, params, &folds)
}
