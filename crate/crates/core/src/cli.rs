//! Command-line front end: `train`, `predict`, `evaluate` and `cv`.
//!
//! Every output file is written to a temporary sibling first and renamed into
//! place, so readers never observe a partial file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{load_arff, load_arff_trailing, load_csv, Dataset};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate_model, Baselines, EvalReport, MethodReport, METHOD_MIXTURE};
use crate::inference::{predict_all, AnnealConfig};
use crate::mixture::{fit, GrowConfig, GrowthLog, MixtureModel, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "mlme", version, about = "Multi-label mixtures of conditional tree-structured Bayesian networks")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow a mixture on a labelled data set and save it.
    Train(TrainArgs),
    /// Predict label vectors with a saved model.
    Predict(PredictArgs),
    /// Score a saved model on labelled data.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation of the training procedure.
    Cv(CvArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV (features then labels) or ARFF file.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of label columns (the last columns / attributes).
    #[arg(long)]
    pub labels: Option<usize>,
    /// Read the data as ARFF regardless of the file extension.
    #[arg(long)]
    pub arff: bool,
    /// ARFF attributes that are labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub label_names: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Upper bound on the number of experts; validation may stop earlier.
    #[arg(long, default_value_t = 5)]
    pub max_experts: usize,
    /// Candidate L2 penalties, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1, 1.0, 10.0])]
    pub lambda_grid: Vec<f64>,
    /// Fraction of training data held out to score candidate structures.
    #[arg(long, default_value_t = 0.25)]
    pub holdout_ratio: f64,
    /// Keep raw feature values instead of z-scoring them.
    #[arg(long)]
    pub no_standardize: bool,
    /// Seed for all data splits during training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainingArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            grow: GrowConfig {
                max_experts: self.max_experts,
                lambda_grid: self.lambda_grid.clone(),
                holdout_ratio: self.holdout_ratio,
                seed: self.seed,
                ..GrowConfig::default()
            },
            standardize: !self.no_standardize,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Model output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path (defaults to `<out>.log.json`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnealArgs {
    /// Annealing steps per instance.
    #[arg(long, default_value_t = 150)]
    pub anneal_iters: usize,
    /// Seed of the annealing search.
    #[arg(long, default_value_t = 0)]
    pub anneal_seed: u64,
}

impl AnnealArgs {
    fn config(&self) -> AnnealConfig {
        AnnealConfig::with_iterations(self.anneal_iters, self.anneal_seed)
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Data with the model's feature and label columns (label values are ignored).
    #[arg(long)]
    pub data: PathBuf,
    /// Read the data as ARFF regardless of the file extension.
    #[arg(long)]
    pub arff: bool,
    /// ARFF attributes that are labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub label_names: Vec<String>,
    /// Prediction CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled data with the model's feature and label columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Read the data as ARFF regardless of the file extension.
    #[arg(long)]
    pub arff: bool,
    /// ARFF attributes that are labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub label_names: Vec<String>,
    /// JSON report output path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Also evaluate a single CTBN and binary relevance on the same folds.
    #[arg(long)]
    pub baselines: bool,
    /// Record per-fold wall-clock times (the report is then no longer reproducible byte for byte).
    #[arg(long)]
    pub timings: bool,
    /// JSON report output path; a text table goes to `<out>.txt`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

fn is_arff(path: &Path, flag: bool) -> bool {
    flag || path.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff"))
}

fn load_data(path: &Path, labels: Option<usize>, arff: bool, label_names: &[String]) -> Result<Dataset> {
    let data = if is_arff(path, arff) {
        if !label_names.is_empty() {
            load_arff(path, label_names)?
        } else {
            let d = labels.ok_or_else(|| Error::Argument("ARFF input needs --labels or --label-names".into()))?;
            load_arff_trailing(path, d)?
        }
    } else {
        if !label_names.is_empty() {
            return Err(Error::Argument("--label-names applies to ARFF input only".into()));
        }
        let d = labels.ok_or_else(|| Error::Argument("CSV input needs --labels".into()))?;
        load_csv(path, d)?
    };
    if let Some(d) = labels {
        if data.d() != d {
            return Err(Error::Schema(format!("--labels {d} but {} label names given", data.d())));
        }
    }
    Ok(data)
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save_model(model: &MixtureModel, path: &Path) -> Result<()> {
    write_atomic(path, &model.to_json())
}

pub fn load_model(path: &Path) -> Result<MixtureModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MixtureModel::from_json(&text)
}

#[derive(Serialize)]
struct TrainingLog<'a> {
    instances: usize,
    m: usize,
    d: usize,
    experts: usize,
    structures: Vec<Vec<Option<usize>>>,
    config: &'a TrainConfig,
    growth: &'a GrowthLog,
}

/// Prediction CSV: one row per instance, `d` binary columns and the
/// mixture log-probability of the predicted vector.
pub fn predictions_csv(preds: &[(Vec<bool>, f64)], d: usize) -> String {
    let mut s = String::new();
    let header: Vec<String> = (0..d).map(|i| format!("y{i}")).chain(["log_prob".to_string()]).collect();
    let _ = writeln!(s, "{}", header.join(","));
    for (y, lp) in preds {
        for v in y {
            s.push(if *v { '1' } else { '0' });
            s.push(',');
        }
        let _ = writeln!(s, "{lp:?}");
    }
    s
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".log.json");
    out.with_file_name(name)
}

fn train(args: &TrainArgs) -> Result<()> {
    let data = load_data(&args.data.data, args.data.labels, args.data.arff, &args.data.label_names)?;
    let cfg = args.training.config();
    log::info!("training on {} instances, m = {}, d = {}", data.len(), data.m(), data.d());
    let growth = fit(&data, &cfg)?;
    for r in &growth.log.rounds {
        log::info!(
            "round K = {}: structure {:?}, validation log-likelihood {:.4}, accepted {}, EM trace {:?}",
            r.experts,
            r.structure,
            r.validation_log_likelihood,
            r.accepted,
            r.em_trace
        );
    }
    log::info!("final EM trace {:?}", growth.log.final_trace);
    let log = TrainingLog {
        instances: data.len(),
        m: data.m(),
        d: data.d(),
        experts: growth.model.k(),
        structures: growth.model.structures().iter().map(|s| s.parents().to_vec()).collect(),
        config: &cfg,
        growth: &growth.log,
    };
    save_model(&growth.model, &args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    write_atomic(&log_path, &serde_json::to_string_pretty(&log).expect("log serializes"))?;
    println!("trained {} expert(s); model written to {}", growth.model.k(), args.out.display());
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_data(&args.data, Some(model.d()), args.arff, &args.label_names)?;
    let prepared = model.prepare(&data)?;
    let preds = predict_all(&model, &prepared, &args.anneal.config())?;
    write_atomic(&args.out, &predictions_csv(&preds, model.d()))?;
    println!("{} predictions written to {}", preds.len(), args.out.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_data(&args.data, Some(model.d()), args.arff, &args.label_names)?;
    let anneal = args.anneal.config();
    let metrics = evaluate_model(&model, &data, &anneal)?;
    let report = EvalReport {
        folds: 1,
        seed: anneal.seed,
        train: None,
        anneal,
        methods: vec![MethodReport::new(METHOD_MIXTURE, vec![metrics])],
    };
    write_atomic(&args.out, &report.to_json())?;
    print!("{}", report.to_table());
    Ok(())
}

fn cv(args: &CvArgs) -> Result<()> {
    let data = load_data(&args.data.data, args.data.labels, args.data.arff, &args.data.label_names)?;
    let baselines = Baselines {
        single_ctbn: args.baselines,
        binary_relevance: args.baselines,
    };
    let report = cross_validate(
        &data,
        &args.training.config(),
        args.folds,
        args.training.seed,
        &args.anneal.config(),
        baselines,
    )?;
    let report = if args.timings { report } else { report.without_timings() };
    write_atomic(&args.out, &report.to_json())?;
    let table = report.to_table();
    let mut table_path = args.out.as_os_str().to_os_string();
    table_path.push(".txt");
    write_atomic(Path::new(&table_path), &table)?;
    print!("{table}");
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Cv(a) => cv(a),
    }
}

/// Single-line error report: `error[CODE]: message`.
pub fn error_line(err: &Error) -> String {
    format!("error[{}]: {}", err.code(), err.to_string().replace('\n', " "))
}
