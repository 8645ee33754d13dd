//! Multi-label evaluation measures, k-fold cross-validation and a
//! binary relevance reference model.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ctbn::{Cpd, CtbnExpert, TreeStructure};
use crate::dataset::{split_folds, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::inference::{predict_all, AnnealConfig};
use crate::logreg::{select_lambda, train_weighted, OptimizerConfig, Problem};
use crate::mixture::{derive_seed, fit, GatingModel, MixtureModel, ModelMeta, TrainConfig};

fn check_shapes(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::Argument(format!("{} predictions for {} instances", preds.len(), truth.len())));
    }
    if preds.iter().zip(truth).any(|(p, t)| p.len() != t.len()) {
        return Err(Error::Argument("prediction and truth rows differ in length".into()));
    }
    if preds.is_empty() {
        return Err(Error::Argument("no instances to evaluate".into()));
    }
    Ok(())
}

/// Fraction of rows predicted entirely correctly.
pub fn exact_match_accuracy(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    check_shapes(preds, truth)?;
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Fraction of individual labels predicted correctly.
pub fn hamming_accuracy(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    check_shapes(preds, truth)?;
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, t) in preds.iter().zip(truth) {
        hits += p.iter().zip(t).filter(|(a, b)| a == b).count();
        total += p.len();
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    /// F1 with an empty class (nothing true, nothing predicted) scoring 1.
    fn f1(self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn per_class_counts(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Vec<Counts> {
    let d = truth[0].len();
    let mut c = vec![Counts::default(); d];
    for (p, t) in preds.iter().zip(truth) {
        for i in 0..d {
            match (p[i], t[i]) {
                (true, true) => c[i].tp += 1,
                (true, false) => c[i].fp += 1,
                (false, true) => c[i].fn_ += 1,
                (false, false) => {}
            }
        }
    }
    c
}

/// F1 over true/false positive and false negative counts pooled across labels.
pub fn micro_f1(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    check_shapes(preds, truth)?;
    let c = per_class_counts(preds, truth).into_iter().fold(Counts::default(), |a, b| Counts {
        tp: a.tp + b.tp,
        fp: a.fp + b.fp,
        fn_: a.fn_ + b.fn_,
    });
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(if denom == 0 { 0.0 } else { 2.0 * c.tp as f64 / denom as f64 })
}

/// Unweighted mean of per-label F1.
pub fn macro_f1(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    check_shapes(preds, truth)?;
    let c = per_class_counts(preds, truth);
    if c.is_empty() {
        return Ok(1.0);
    }
    Ok(c.iter().map(|k| k.f1()).sum::<f64>() / c.len() as f64)
}

/// `sum_n -log P(y_n | x_n)` over prepared data.
pub fn cll_loss(model: &MixtureModel, test: &Dataset) -> f64 {
    test.iter().map(|i| -model.log_prob(&i.features, &i.labels)).sum()
}

/// Measures for one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub test_size: usize,
    pub experts: usize,
    pub ema: f64,
    pub hamming: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Summed over the test set.
    pub cll_loss: f64,
    pub cll_loss_mean: f64,
    pub wall_time_secs: f64,
}

/// Predicts raw `test` data with `model` (which applies its own scaling) and scores it.
pub fn evaluate_model(model: &MixtureModel, test: &Dataset, anneal: &AnnealConfig) -> Result<FoldMetrics> {
    let prepared = model.prepare(test)?;
    let preds: Vec<Vec<bool>> = predict_all(model, &prepared, anneal)?.into_iter().map(|(y, _)| y).collect();
    let truth = prepared.label_matrix();
    let cll = cll_loss(model, &prepared);
    Ok(FoldMetrics {
        test_size: test.len(),
        experts: model.k(),
        ema: exact_match_accuracy(&preds, &truth)?,
        hamming: hamming_accuracy(&preds, &truth)?,
        micro_f1: micro_f1(&preds, &truth)?,
        macro_f1: macro_f1(&preds, &truth)?,
        cll_loss: cll,
        cll_loss_mean: cll / test.len() as f64,
        wall_time_secs: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub ema: Summary,
    pub hamming: Summary,
    pub micro_f1: Summary,
    pub macro_f1: Summary,
    /// Mean and spread of per-fold sums.
    pub cll_loss: Summary,
    pub cll_loss_mean: Summary,
    /// Sum over all folds.
    pub cll_loss_total: f64,
    pub experts: Summary,
}

impl Aggregate {
    pub fn of(folds: &[FoldMetrics]) -> Self {
        let col = |f: fn(&FoldMetrics) -> f64| Summary::of(&folds.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            ema: col(|f| f.ema),
            hamming: col(|f| f.hamming),
            micro_f1: col(|f| f.micro_f1),
            macro_f1: col(|f| f.macro_f1),
            cll_loss: col(|f| f.cll_loss),
            cll_loss_mean: col(|f| f.cll_loss_mean),
            cll_loss_total: folds.iter().map(|f| f.cll_loss).sum(),
            experts: col(|f| f.experts as f64),
        }
    }
}

/// Results of one method, per fold and aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub per_fold: Vec<FoldMetrics>,
    pub aggregate: Aggregate,
}

impl MethodReport {
    pub fn new(method: impl Into<String>, per_fold: Vec<FoldMetrics>) -> Self {
        let aggregate = Aggregate::of(&per_fold);
        MethodReport {
            method: method.into(),
            per_fold,
            aggregate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Number of train/test splits; 1 for a single held-out evaluation.
    pub folds: usize,
    pub seed: u64,
    /// Training settings; absent when a stored model was evaluated.
    pub train: Option<TrainConfig>,
    pub anneal: AnnealConfig,
    pub methods: Vec<MethodReport>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for m in &mut r.methods {
            m.per_fold.iter_mut().for_each(|f| f.wall_time_secs = 0.0);
        }
        r
    }

    /// Plain-text table with one row per method.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>15} {:>15} {:>15} {:>15} {:>17}",
            "method", "folds", "EMA", "micro-F1", "macro-F1", "Hamming", "CLL-loss/fold"
        );
        for m in &self.methods {
            let a = &m.aggregate;
            let cell = |x: Summary| format!("{:.3} ± {:.3}", x.mean, x.sd);
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>15} {:>15} {:>15} {:>15} {:>17}",
                m.method,
                m.per_fold.len(),
                cell(a.ema),
                cell(a.micro_f1),
                cell(a.macro_f1),
                cell(a.hamming),
                format!("{:.1} ± {:.1}", a.cll_loss.mean, a.cll_loss.sd)
            );
        }
        s
    }
}

/// Reference methods trained on the same folds as the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baselines {
    /// Mixture growth capped at one expert.
    pub single_ctbn: bool,
    pub binary_relevance: bool,
}

pub const METHOD_MIXTURE: &str = "ML-ME";
pub const METHOD_SINGLE: &str = "CTBN";
pub const METHOD_BR: &str = "BR";

/// Seeded k-fold cross-validation of mixture training (and optional baselines).
pub fn cross_validate(
    data: &Dataset,
    train: &TrainConfig,
    k: usize,
    seed: u64,
    anneal: &AnnealConfig,
    baselines: Baselines,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    let folds = split_folds(data, k, seed)?;
    let mut mixture = Vec::new();
    let mut single = Vec::new();
    let mut br = Vec::new();
    for (f, (tr, te)) in folds.iter().enumerate() {
        let fold_train = TrainConfig {
            grow: crate::mixture::GrowConfig {
                seed: derive_seed(train.grow.seed, 1000 + f as u64),
                ..train.grow.clone()
            },
            ..train.clone()
        };
        let timed = |cfg: &TrainConfig| -> Result<FoldMetrics> {
            let start = Instant::now();
            let model = fit(tr, cfg)?.model;
            let mut m = evaluate_model(&model, te, anneal)?;
            m.wall_time_secs = start.elapsed().as_secs_f64();
            Ok(m)
        };
        let m = timed(&fold_train)?;
        log::info!("fold {}/{k}: K = {}, EMA = {:.4}, CLL-loss = {:.3}", f + 1, m.experts, m.ema, m.cll_loss);
        mixture.push(m);
        if baselines.single_ctbn {
            let mut c = fold_train.clone();
            c.grow.max_experts = 1;
            single.push(timed(&c)?);
        }
        if baselines.binary_relevance {
            let start = Instant::now();
            let model = train_binary_relevance(tr, &train.grow.lambda_grid, train.standardize, &train.grow.optimizer, fold_train.grow.seed)?;
            let mut m = evaluate_model(&model, te, anneal)?;
            m.wall_time_secs = start.elapsed().as_secs_f64();
            br.push(m);
        }
    }
    let mut methods = vec![MethodReport::new(METHOD_MIXTURE, mixture)];
    if baselines.single_ctbn {
        methods.push(MethodReport::new(METHOD_SINGLE, single));
    }
    if baselines.binary_relevance {
        methods.push(MethodReport::new(METHOD_BR, br));
    }
    Ok(EvalReport {
        folds: k,
        seed,
        train: Some(train.clone()),
        anneal: *anneal,
        methods,
    })
}

/// Folds used to choose each label's penalty in binary relevance.
pub const BR_LAMBDA_FOLDS: usize = 5;

/// Independent logistic regression per label, each with its own penalty
/// chosen from `grid` by internal cross-validation. Returned as a single
/// expert with no label dependencies, so MAP is per-label thresholding at 0.5.
pub fn train_binary_relevance(
    train: &Dataset,
    grid: &[f64],
    standardize: bool,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<MixtureModel> {
    let standardizer = standardize.then(|| Standardizer::fit(train));
    let data = match &standardizer {
        Some(s) => s.transform(train)?,
        None => train.clone(),
    };
    let dim = data.m() + 1;
    let rows: Vec<&[f64]> = data.iter().map(|i| i.features.as_slice()).collect();
    let mut cpds = Vec::with_capacity(data.d());
    let mut chosen = Vec::with_capacity(data.d());
    for label in 0..data.d() {
        let problem = Problem::new(rows.clone(), data.label_column(label), vec![1.0; data.len()])?;
        let lambda = select_lambda(&problem, dim, grid, BR_LAMBDA_FOLDS, cfg, derive_seed(seed, label as u64))?;
        chosen.push(lambda);
        cpds.push(Cpd::Root(train_weighted(&problem, dim, lambda, cfg)?));
    }
    let expert = CtbnExpert::new(TreeStructure::empty(data.d()), cpds)?;
    MixtureModel::new(
        vec![expert],
        GatingModel::zeros(1, dim),
        ModelMeta {
            m: data.m(),
            d: data.d(),
            lambda: chosen.iter().sum::<f64>() / chosen.len().max(1) as f64,
            lambda_gate: 0.0,
            standardizer,
        },
    )
}

/// Binary relevance predictions for `test`; a fixed `lambda` skips the search.
pub fn binary_relevance_baseline(train: &Dataset, test: &Dataset, lambda: Option<f64>) -> Result<Vec<Vec<bool>>> {
    if train.m() != test.m() || train.d() != test.d() {
        return Err(Error::Schema("train and test differ in (m, d)".into()));
    }
    let grid = match lambda {
        Some(l) => vec![l],
        None => TrainConfig::default().grow.lambda_grid,
    };
    let model = train_binary_relevance(train, &grid, true, &OptimizerConfig::default(), 0)?;
    let prepared = model.prepare(test)?;
    Ok(prepared
        .iter()
        .map(|i| model.experts[0].exact_map(&i.features).0)
        .collect())
}
