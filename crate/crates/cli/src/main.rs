use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use logodm_core::apriori::{format_rules_table, frequent_itemsets, generate_rules};
use logodm_core::eval::{error_vs_feature_count, evaluate_classifier, evaluate_with_selection, DEFAULT_FOLDS};
use logodm_core::io::{read_dataset, write_dataset};
use logodm_core::pipeline::{
    load_target, predict_case, run_pipeline, ModelFile, PipelineConfig, PipelineError,
    RelationSource, Stage,
};
use logodm_core::schema::{Dataset, DatasetSchema};
use logodm_core::select::mrmr_select;
use logodm_core::synth::{generate_dataset, GeneratorSpec};
use logodm_core::target::{ImputePolicy, ProjectionList};
use logodm_core::tree::{induce_tree, TreeParams};

#[derive(Parser)]
#[command(name = "logodm", version, about = "Categorical data mining over coded case records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a planted class rule
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Join, project, expand and impute relations into a target set
    Build {
        /// Pipeline config supplying relations, projection and policy
        #[arg(long, conflicts_with = "relation")]
        config: Option<PathBuf>,
        /// A relation as DATA SCHEMA; repeat for each relation
        #[arg(long, num_args = 2, value_names = ["DATA", "SCHEMA"])]
        relation: Vec<PathBuf>,
        /// Comma-separated attributes to keep
        #[arg(long, value_delimiter = ',')]
        project: Option<Vec<String>>,
        #[arg(long)]
        impute: Option<ImputePolicy>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema_out: PathBuf,
    },
    /// Rank features with mRMR
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        k_features: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Induce a decision tree
    Train {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        k_features: Option<usize>,
        #[command(flatten)]
        tree: TreeArgs,
        /// Model file (schema, features and tree)
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tree_out: Option<PathBuf>,
    },
    /// Mine association rules
    Rules {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.1)]
        min_support: f64,
        #[arg(long, default_value_t = 0.7)]
        min_confidence: f64,
        #[arg(long)]
        include_class: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Cross-validate and trace error against feature count
    Evaluate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long)]
        seed: u64,
        /// Comma-separated feature counts for the error curve
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        /// Select this many features inside each fold for the confusion matrix
        #[arg(long)]
        k_features: Option<usize>,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run the whole pipeline from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Classify records with a trained model
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV laid out like the model schema; the class column is optional
        #[arg(long)]
        record: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl Input {
    fn load(&self) -> Result<Dataset> {
        let schema = DatasetSchema::load(&self.schema)?;
        Ok(read_dataset(&self.data, &schema)?)
    }
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_split: usize,
}

impl TreeArgs {
    fn params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_records_per_split: self.min_split,
        }
    }
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    impute: Option<ImputePolicy>,
    #[arg(long)]
    k_features: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_split: Option<usize>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    include_class: bool,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
}

impl Overrides {
    fn apply(self, c: &mut PipelineConfig) {
        if let Some(v) = self.impute {
            c.impute = v;
        }
        if self.k_features.is_some() {
            c.k_features = self.k_features;
        }
        if self.max_depth.is_some() {
            c.max_depth = self.max_depth;
        }
        if let Some(v) = self.min_split {
            c.min_split = v;
        }
        if let Some(v) = self.min_support {
            c.min_support = v;
        }
        if let Some(v) = self.min_confidence {
            c.min_confidence = v;
        }
        c.include_class |= self.include_class;
        if let Some(v) = self.folds {
            c.folds = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.k_list.is_some() {
            c.k_list = self.k_list;
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            if !contents.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            spec,
            out,
            schema,
            manifest,
        } => {
            let spec = GeneratorSpec::load(&spec)?;
            let (ds, truth) = generate_dataset(&spec)?;
            write_dataset(&out, &ds)?;
            ds.schema().save(&schema)?;
            write(&manifest, &truth.to_json_pretty())?;
            eprintln!("generated {} records into {}", ds.len(), out.display());
        }
        Command::Build {
            config,
            relation,
            project,
            impute,
            out,
            schema_out,
        } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => {
                    if relation.is_empty() {
                        bail!("build needs --config or at least one --relation DATA SCHEMA");
                    }
                    PipelineConfig::for_relations(
                        relation
                            .chunks(2)
                            .map(|pair| RelationSource {
                                name: None,
                                data: std::path::absolute(&pair[0]).unwrap_or(pair[0].clone()),
                                schema: std::path::absolute(&pair[1]).unwrap_or(pair[1].clone()),
                            })
                            .collect(),
                    )
                }
            };
            if let Some(names) = project {
                cfg.projection = Some(ProjectionList::new(names)?);
            }
            if let Some(p) = impute {
                cfg.impute = p;
            }
            let target = load_target(&cfg)?;
            write_dataset(&out, &target)?;
            target.schema().save(&schema_out)?;
            eprintln!(
                "target set: {} records, {} attributes",
                target.len(),
                target.schema().len()
            );
        }
        Command::Select {
            input,
            k_features,
            out,
        } => {
            let ds = input.load()?;
            let trace = mrmr_select(&ds, k_features)?;
            emit(out.as_deref(), &pretty(&trace))?;
        }
        Command::Train {
            input,
            k_features,
            tree,
            model,
            tree_out,
        } => {
            let ds = input.load()?;
            let features: Vec<String> = match k_features {
                Some(k) => mrmr_select(&ds, k)?
                    .attributes()
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                None => ds.schema().feature_names().iter().map(|s| s.to_string()).collect(),
            };
            let names: Vec<&str> = features.iter().map(String::as_str).collect();
            let fitted = induce_tree(&ds.with_features(&names)?, &tree.params())?;
            let file = ModelFile {
                schema: ds.schema().clone(),
                features,
                tree: fitted,
            };
            write(&model, &file.to_json_pretty())?;
            if let Some(path) = tree_out {
                write(&path, &file.tree.to_json_pretty())?;
            }
            eprintln!(
                "tree: depth {}, {} leaves",
                file.tree.depth(),
                file.tree.leaf_count()
            );
        }
        Command::Rules {
            input,
            min_support,
            min_confidence,
            include_class,
            out,
            text,
        } => {
            let ds = input.load()?;
            let ts = logodm_core::target::to_transactions(&ds, include_class)?;
            let table = frequent_itemsets(&ts, min_support)?;
            let rules = generate_rules(&table, min_confidence)?;
            if let Some(path) = &text {
                write(path, &format_rules_table(&rules))?;
            }
            match (&out, &text) {
                (None, Some(_)) => {}
                (None, None) => print!("{}", format_rules_table(&rules)),
                (Some(path), _) => write(path, &pretty(&rules))?,
            }
        }
        Command::Evaluate {
            input,
            folds,
            seed,
            k_list,
            k_features,
            tree,
            out,
            curve,
        } => {
            let ds = input.load()?;
            let params = tree.params();
            let confusion = match k_features {
                Some(k) => evaluate_with_selection(&ds, k, &params, folds, seed)?,
                None => evaluate_classifier(&ds, &params, folds, seed)?,
            };
            let ks = k_list.unwrap_or_else(|| (1..=ds.schema().feature_names().len()).collect());
            let error_curve = error_vs_feature_count(&ds, &ks, &params, folds, seed)?;
            let report = serde_json::json!({
                "confusion_matrix": confusion,
                "error_curve": error_curve,
            });
            emit(out.as_deref(), &pretty(&report))?;
            if let Some(path) = curve {
                write(&path, &error_curve.to_text())?;
            }
            eprint!("{}", confusion.to_text());
        }
        Command::Run {
            config,
            out_dir,
            overrides,
        } => {
            let mut cfg = PipelineConfig::load(&config).map_err(|error| PipelineError {
                stage: Stage::Config,
                error,
            })?;
            overrides.apply(&mut cfg);
            let report = run_pipeline(&cfg, &out_dir)?;
            println!(
                "{} records, {} features selected, cross-validated error {:.4}, {} rules; reports in {}",
                report.target.records,
                report.selection.len(),
                report.evaluation.error,
                report.rules.rules.len(),
                out_dir.display()
            );
        }
        Command::Predict { model, record } => {
            let model = ModelFile::load(&model)?;
            for p in predict_case(&model, &record)? {
                let dist = p
                    .distribution
                    .iter()
                    .map(|(label, n)| format!("{label}:{n}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                match &p.fallback_at {
                    Some(attr) => println!("{}\t{dist}\t(fallback at {attr})", p.label),
                    None => println!("{}\t{dist}", p.label),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
