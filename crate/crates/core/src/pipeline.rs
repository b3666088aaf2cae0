//! End-to-end run: ingest, target set, imputation, then a classification
//! branch (selection, tree, cross-validation) and a rule-mining branch.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apriori::{format_rules_table, frequent_itemsets, generate_rules, AssociationRule};
use crate::error::{Error, Result};
use crate::eval::{
    error_curve_on_folds, evaluate_on_folds, stratified_kfold, ConfusionMatrix, ErrorCurve,
    DEFAULT_FOLDS,
};
use crate::io::{read_dataset, read_records, write_dataset};
use crate::schema::{Dataset, DatasetSchema};
use crate::select::{mrmr_select, SelectionTrace};
use crate::target::{
    expand_coded_flags, impute_missing, join_all, project, to_transactions, ImputePolicy,
    ProjectionList, Relation,
};
use crate::tree::{induce_tree, DecisionTree, Prediction, TreeParams};

pub const TOOL_NAME: &str = "logodm";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Build,
    Impute,
    Select,
    Train,
    Evaluate,
    Rules,
    Report,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Build => "build",
            Stage::Impute => "impute",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Rules => "rules",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {error}")]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|error| PipelineError { stage, error })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub data: PathBuf,
    pub schema: PathBuf,
}

impl RelationSource {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.data
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "relation".into())
        })
    }

    pub fn load(&self) -> Result<Relation> {
        let schema = DatasetSchema::load(&self.schema)?;
        let data = read_dataset(&self.data, &schema)?;
        Ok(Relation::from_dataset(self.display_name(), data))
    }
}

fn default_impute() -> ImputePolicy {
    ImputePolicy::UnknownCategory
}
fn default_min_split() -> usize {
    2
}
fn default_min_support() -> f64 {
    0.1
}
fn default_min_confidence() -> f64 {
    0.7
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub relations: Vec<RelationSource>,
    /// Attributes kept after the join; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionList>,
    #[serde(default = "default_impute")]
    pub impute: ImputePolicy,
    /// Features kept by mRMR; every feature when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_features: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    #[serde(default = "default_min_support")]
    pub min_support: f64,
    #[serde(default = "default_min_confidence")]
    pub min_confidence: f64,
    #[serde(default)]
    pub include_class: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// No default.
    pub seed: u64,
    /// Feature counts for the error curve; 1 through the feature count when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<usize>>,
}

impl PipelineConfig {
    /// Config over `relations` with every other key at its default.
    pub fn for_relations(relations: Vec<RelationSource>) -> Self {
        PipelineConfig {
            relations,
            projection: None,
            impute: default_impute(),
            k_features: None,
            max_depth: None,
            min_split: default_min_split(),
            min_support: default_min_support(),
            min_confidence: default_min_confidence(),
            include_class: false,
            folds: default_folds(),
            seed: 0,
            k_list: None,
        }
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Parses a config file; relative paths are taken from the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base)?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        for rel in &mut self.relations {
            for p in [&mut rel.data, &mut rel.schema] {
                let joined = base.join(&*p);
                *p = std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))?;
            }
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_records_per_split: self.min_split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.relations.is_empty() {
            return Err(Error::Parameter("config lists no relations".into()));
        }
        for rel in &self.relations {
            for p in [&rel.data, &rel.schema] {
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                    ));
                }
            }
        }
        self.tree_params().validate()?;
        if self.k_features == Some(0) {
            return Err(Error::Parameter("k_features must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Parameter(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return Err(Error::Parameter(format!(
                "min_support must lie in (0, 1], got {}",
                self.min_support
            )));
        }
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(Error::Parameter(format!(
                "min_confidence must lie in (0, 1], got {}",
                self.min_confidence
            )));
        }
        if let Some(ks) = &self.k_list {
            if ks.is_empty() || ks.contains(&0) {
                return Err(Error::Parameter("k_list must hold positive counts".into()));
            }
        }
        Ok(())
    }
}

/// Joins, projects, expands coded flags and imputes.
pub fn prepare_target(
    relations: &[Relation],
    projection: Option<&ProjectionList>,
    policy: ImputePolicy,
) -> std::result::Result<(Dataset, usize), PipelineError> {
    let joined = join_all(relations).at(Stage::Build)?;
    let attrs = match projection {
        Some(p) => p.clone(),
        None => ProjectionList::all_of(joined.schema()).at(Stage::Build)?,
    };
    let projected = project(&joined, &attrs).at(Stage::Build)?;
    let target = expand_coded_flags(projected.as_dataset()).at(Stage::Build)?;
    let missing = target.count_missing();
    let imputed = impute_missing(&target, policy).at(Stage::Impute)?;
    Ok((imputed, missing))
}

/// Trained tree plus the schema its records are read with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: DatasetSchema,
    pub features: Vec<String>,
    pub tree: DecisionTree,
}

impl ModelFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Predictions for every record of a CSV laid out like the model's schema;
/// the class column may be omitted.
pub fn predict_case(model: &ModelFile, records_csv: &Path) -> Result<Vec<Prediction>> {
    let file = fs::File::open(records_csv).map_err(|e| Error::io(records_csv, e))?;
    let records = read_records(file, &model.schema, true, records_csv)?;
    records
        .iter()
        .map(|r| model.tree.predict(r, &model.schema))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub records: usize,
    pub attributes: Vec<String>,
    pub class_attribute: String,
    pub missing_cells_before_impute: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub features: Vec<String>,
    pub depth: usize,
    pub leaves: usize,
    pub model: DecisionTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub folds: usize,
    pub seed: u64,
    pub k_features: usize,
    pub confusion_matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub error: f64,
    pub error_curve: ErrorCurve,
    pub best_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RulesSummary {
    pub transactions: usize,
    pub frequent_itemsets: usize,
    pub rules: Vec<AssociationRule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// Everything a run produced. `timings` is the only field that varies
/// between identical runs and is serialized last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub config: PipelineConfig,
    pub target: TargetSummary,
    pub selection: SelectionTrace,
    pub tree: TreeSummary,
    pub evaluation: EvaluationSummary,
    pub rules: RulesSummary,
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "{} {} run report", self.tool.name, self.tool.version);
        let _ = writeln!(out);
        let _ = writeln!(out, "relations:");
        for rel in &c.relations {
            let _ = writeln!(out, "  {}  {}  {}", rel.display_name(), rel.data.display(), rel.schema.display());
        }
        let _ = writeln!(
            out,
            "impute={} k_features={} max_depth={} min_split={} min_support={} min_confidence={} include_class={} folds={} seed={}",
            c.impute,
            self.evaluation.k_features,
            c.max_depth.map_or("none".to_string(), |d| d.to_string()),
            c.min_split,
            c.min_support,
            c.min_confidence,
            c.include_class,
            c.folds,
            c.seed
        );
        let _ = writeln!(out);
        let t = &self.target;
        let _ = writeln!(
            out,
            "target set: {} records, {} attributes, class `{}`, {} missing cells before imputation",
            t.records,
            t.attributes.len(),
            t.class_attribute,
            t.missing_cells_before_impute
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "selection:");
        let _ = writeln!(out, "{:>4}  {:<32}  {:>9}  {:>10}  {:>9}", "rank", "attribute", "relevance", "redundancy", "score");
        for s in &self.selection.steps {
            let _ = writeln!(
                out,
                "{:>4}  {:<32}  {:>9.5}  {:>10.5}  {:>9.5}",
                s.rank, s.attribute, s.relevance, s.redundancy, s.score
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "tree: depth {}, {} leaves", self.tree.depth, self.tree.leaves);
        let _ = writeln!(out);
        let e = &self.evaluation;
        let _ = writeln!(out, "cross-validation ({} folds, seed {}): accuracy {:.4}, error {:.4}", e.folds, e.seed, e.accuracy, e.error);
        out.push_str(&e.confusion_matrix.to_text());
        let _ = writeln!(out);
        let _ = writeln!(out, "error curve:");
        out.push_str(&e.error_curve.to_text());
        if let Some(k) = e.best_k {
            let _ = writeln!(out, "lowest mean error at k = {k}");
        }
        let _ = writeln!(out);
        let r = &self.rules;
        let _ = writeln!(
            out,
            "rules: {} transactions, {} frequent itemsets, {} rules",
            r.transactions,
            r.frequent_itemsets,
            r.rules.len()
        );
        out.push_str(&format_rules_table(&r.rules));
        let _ = writeln!(out);
        let _ = writeln!(out, "timings (ms):");
        for t in &self.timings {
            let _ = writeln!(out, "  {:<10} {:>10.2}", t.stage, t.millis);
        }
        out
    }
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn start() -> Self {
        Clock {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            millis: (now - self.last).as_secs_f64() * 1e3,
        });
        self.last = now;
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut contents = contents.to_string();
    if !contents.ends_with('\n') {
        contents.push('\n');
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every stage and writes the report files into `out_dir`.
pub fn run_pipeline(
    config: &PipelineConfig,
    out_dir: &Path,
) -> std::result::Result<RunReport, PipelineError> {
    config.validate().at(Stage::Config)?;
    let mut clock = Clock::start();

    let relations = config
        .relations
        .iter()
        .map(RelationSource::load)
        .collect::<Result<Vec<_>>>()
        .at(Stage::Ingest)?;
    clock.lap(Stage::Ingest);

    let (target, missing) = prepare_target(&relations, config.projection.as_ref(), config.impute)?;
    clock.lap(Stage::Build);
    let class_attribute = target
        .schema()
        .class_attribute()
        .ok_or_else(|| Error::Schema("target set has no class attribute".into()))
        .at(Stage::Build)?
        .to_string();
    let n_features = target.schema().feature_names().len();
    let k = config.k_features.unwrap_or(n_features);
    if k > n_features {
        return Err(Error::Parameter(format!(
            "k_features {k} exceeds the {n_features} available features"
        )))
        .at(Stage::Select);
    }

    let selection = mrmr_select(&target, k).at(Stage::Select)?;
    clock.lap(Stage::Select);

    let params = config.tree_params();
    let features: Vec<String> = selection.attributes().iter().map(|s| s.to_string()).collect();
    let names: Vec<&str> = features.iter().map(String::as_str).collect();
    let tree = target
        .with_features(&names)
        .and_then(|ds| induce_tree(&ds, &params))
        .at(Stage::Train)?;
    clock.lap(Stage::Train);

    let k_list = config
        .k_list
        .clone()
        .unwrap_or_else(|| (1..=n_features).collect());
    let folds = stratified_kfold(&target, config.folds, config.seed).at(Stage::Evaluate)?;
    let confusion = evaluate_on_folds(&target, &folds, Some(k), &params).at(Stage::Evaluate)?;
    let curve = error_curve_on_folds(&target, &k_list, &params, &folds).at(Stage::Evaluate)?;
    clock.lap(Stage::Evaluate);

    let transactions = to_transactions(&target, config.include_class).at(Stage::Rules)?;
    let table = frequent_itemsets(&transactions, config.min_support).at(Stage::Rules)?;
    let rules = generate_rules(&table, config.min_confidence).at(Stage::Rules)?;
    clock.lap(Stage::Rules);

    let mut echo = config.clone();
    echo.k_features = Some(k);
    echo.k_list = Some(curve.points.iter().map(|p| p.k).collect());
    let model = ModelFile {
        schema: target.schema().clone(),
        features: features.clone(),
        tree: tree.clone(),
    };
    let mut report = RunReport {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        config: echo,
        target: TargetSummary {
            records: target.len(),
            attributes: target.schema().names().map(str::to_string).collect(),
            class_attribute,
            missing_cells_before_impute: missing,
        },
        selection: selection.clone(),
        tree: TreeSummary {
            features,
            depth: tree.depth(),
            leaves: tree.leaf_count(),
            model: tree.clone(),
        },
        evaluation: EvaluationSummary {
            folds: config.folds,
            seed: config.seed,
            k_features: k,
            accuracy: confusion.accuracy(),
            error: confusion.error(),
            confusion_matrix: confusion,
            best_k: curve.argmin(),
            error_curve: curve,
        },
        rules: RulesSummary {
            transactions: transactions.len(),
            frequent_itemsets: table.len(),
            rules,
        },
        timings: Vec::new(),
    };

    write_outputs(out_dir, &target, &model, &report).at(Stage::Report)?;
    clock.lap(Stage::Report);
    report.timings = clock.timings;
    let write_reports = || -> Result<()> {
        write_file(&out_dir.join("report.json"), &report.to_json_pretty())?;
        write_file(&out_dir.join("report.txt"), &report.to_text())
    };
    write_reports().at(Stage::Report)?;
    Ok(report)
}

fn write_outputs(out_dir: &Path, target: &Dataset, model: &ModelFile, report: &RunReport) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_dataset(out_dir.join("target.csv"), target)?;
    target.schema().save(out_dir.join("target.schema.json"))?;
    write_file(&out_dir.join("model.json"), &model.to_json_pretty())?;
    write_file(&out_dir.join("tree.json"), &model.tree.to_json_pretty())?;
    write_file(&out_dir.join("selection.json"), &pretty(&report.selection))?;
    write_file(&out_dir.join("rules.json"), &pretty(&report.rules.rules))?;
    write_file(&out_dir.join("rules.txt"), &format_rules_table(&report.rules.rules))?;
    let evaluation = serde_json::json!({
        "confusion_matrix": report.evaluation.confusion_matrix,
        "error_curve": report.evaluation.error_curve,
    });
    write_file(&out_dir.join("evaluation.json"), &pretty(&evaluation))?;
    write_file(&out_dir.join("curve.txt"), &report.evaluation.error_curve.to_text())
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

/// Loads the target set of a config without running the mining stages.
pub fn load_target(config: &PipelineConfig) -> std::result::Result<Dataset, PipelineError> {
    config.validate().at(Stage::Config)?;
    let relations = config
        .relations
        .iter()
        .map(RelationSource::load)
        .collect::<Result<Vec<_>>>()
        .at(Stage::Ingest)?;
    prepare_target(&relations, config.projection.as_ref(), config.impute).map(|(ds, _)| ds)
}
