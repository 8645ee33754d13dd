//! Mixtures of CTBN experts with a softmax gate.
//!
//! `P(y | x) = sum_k g_k(x) P(y | x, T_k)`, with `g` a softmax over linear
//! scores. Parameters for fixed structures are fitted by EM
//! ([`em_fit`]); structures are added one at a time by [`grow_mixture`],
//! each learned on instances reweighted by how poorly the current mixture
//! explains them.

use serde::{Deserialize, Serialize};

use crate::ctbn::{train_parameters, train_parameters_from, CtbnExpert, TreeStructure};
use crate::dataset::{holdout_indices, Dataset, Standardizer, WeightVector};
use crate::error::{Error, Result};
use crate::logreg::OptimizerConfig;
use crate::optim::{dot, minimize};
use crate::structlearn::learn_structure;

/// Numerically stable `log(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax gate: one `(m + 1)`-vector of scores per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingModel {
    pub theta: Vec<Vec<f64>>,
}

impl GatingModel {
    pub fn zeros(k: usize, dim: usize) -> Self {
        GatingModel {
            theta: vec![vec![0.0; dim]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn log_probs(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self.theta.iter().map(|t| dot(t, x)).collect();
        let lse = log_sum_exp(&scores);
        scores.into_iter().map(|s| s - lse).collect()
    }

    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self.theta.iter().map(|t| dot(t, x)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    fn penalty(&self, lambda: f64) -> f64 {
        0.5 * lambda * self.theta.iter().flatten().map(|v| v * v).sum::<f64>()
    }
}

pub fn gating_probs(g: &GatingModel, x: &[f64]) -> Vec<f64> {
    g.probs(x)
}

/// Regularization strengths and preprocessing carried with a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub m: usize,
    pub d: usize,
    pub lambda: f64,
    pub lambda_gate: f64,
    /// Applied to raw features by [`MixtureModel::prepare`].
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub experts: Vec<CtbnExpert>,
    pub gating: GatingModel,
    pub meta: ModelMeta,
}

impl MixtureModel {
    pub fn new(experts: Vec<CtbnExpert>, gating: GatingModel, meta: ModelMeta) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::Argument("mixture needs at least one expert".into()));
        }
        if gating.k() != experts.len() {
            return Err(Error::Argument(format!("{} gate rows for {} experts", gating.k(), experts.len())));
        }
        let dim = meta.m + 1;
        for (k, e) in experts.iter().enumerate() {
            if e.d() != meta.d || e.input_dim() != dim {
                return Err(Error::Schema(format!(
                    "expert {k} has (m, d) = ({}, {}), mixture has ({}, {})",
                    e.input_dim().saturating_sub(1),
                    e.d(),
                    meta.m,
                    meta.d
                )));
            }
        }
        if gating.theta.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Argument("gate rows must be finite (m + 1)-vectors".into()));
        }
        if let Some(s) = &meta.standardizer {
            if s.means.len() != meta.m || s.scales.len() != meta.m {
                return Err(Error::Schema("standardizer does not match m".into()));
            }
        }
        Ok(MixtureModel { experts, gating, meta })
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    pub fn d(&self) -> usize {
        self.meta.d
    }

    pub fn structures(&self) -> Vec<TreeStructure> {
        self.experts.iter().map(|e| e.structure.clone()).collect()
    }

    /// Checks shape and applies the stored feature scaling.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        if data.m() != self.m() || data.d() != self.d() {
            return Err(Error::Schema(format!(
                "model expects (m, d) = ({}, {}), data has ({}, {})",
                self.m(),
                self.d(),
                data.m(),
                data.d()
            )));
        }
        match &self.meta.standardizer {
            Some(s) => s.transform(data),
            None => Ok(data.clone()),
        }
    }

    /// Per-expert `log g_k(x) + log P(y | x, T_k)`.
    pub fn component_log_probs(&self, x: &[f64], y: &[bool]) -> Vec<f64> {
        self.gating
            .log_probs(x)
            .into_iter()
            .zip(&self.experts)
            .map(|(lg, e)| lg + e.joint_log_prob(x, y))
            .collect()
    }

    /// `log P(y | x)` under the mixture.
    pub fn log_prob(&self, x: &[f64], y: &[bool]) -> f64 {
        log_sum_exp(&self.component_log_probs(x, y))
    }

    /// Sum of all L2 penalties (gate rows in full, CPD weights without bias).
    pub fn penalty(&self) -> f64 {
        let experts: f64 = self
            .experts
            .iter()
            .flat_map(|e| e.cpds.iter())
            .flat_map(|c| [c.model(false), c.model(true)].into_iter().take(cpd_model_count(c)))
            .map(|m| 0.5 * m.lambda * m.params[1..].iter().map(|v| v * v).sum::<f64>())
            .sum();
        experts + self.gating.penalty(self.meta.lambda_gate)
    }

    /// Observed log-likelihood of `data` minus all penalties.
    pub fn regularized_log_likelihood(&self, data: &Dataset) -> f64 {
        log_likelihood(self, data) - self.penalty()
    }
}

fn cpd_model_count(c: &crate::ctbn::Cpd) -> usize {
    match c {
        crate::ctbn::Cpd::Root(_) => 1,
        crate::ctbn::Cpd::Conditional { .. } => 2,
    }
}

pub fn mixture_log_prob(model: &MixtureModel, x: &[f64], y: &[bool]) -> f64 {
    model.log_prob(x, y)
}

/// `sum_n log P(y_n | x_n)`.
pub fn log_likelihood(model: &MixtureModel, data: &Dataset) -> f64 {
    data.iter().map(|i| model.log_prob(&i.features, &i.labels)).sum()
}

/// Posterior expert memberships, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub h: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn k(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.h.iter().map(|r| r[k]).collect()
    }
}

pub fn e_step(model: &MixtureModel, data: &Dataset) -> Responsibilities {
    let h = data
        .iter()
        .map(|inst| {
            let a = model.component_log_probs(&inst.features, &inst.labels);
            let lse = log_sum_exp(&a);
            a.into_iter().map(|v| (v - lse).exp()).collect()
        })
        .collect();
    Responsibilities { h }
}

/// Gate objective `sum_n sum_k h_nk log g_k(x_n) - (lambda/2) ||theta||^2`
/// and its gradient, with `theta` flattened row-major (`K x (m + 1)`).
pub fn gating_objective_and_gradient(theta: &[f64], h: &Responsibilities, data: &Dataset, lambda: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; theta.len()];
    let v = gating_objective_into(theta, h, data, lambda, &mut grad);
    (v, grad)
}

fn gating_objective_into(theta: &[f64], h: &Responsibilities, data: &Dataset, lambda: f64, grad: &mut [f64]) -> f64 {
    let dim = data.m() + 1;
    let k = theta.len() / dim;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    let mut scores = vec![0.0; k];
    for (inst, hn) in data.iter().zip(&h.h) {
        let x = &inst.features;
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(&theta[j * dim..(j + 1) * dim], x);
        }
        let lse = log_sum_exp(&scores);
        for j in 0..k {
            let lg = scores[j] - lse;
            value += hn[j] * lg;
            let c = hn[j] - lg.exp();
            grad[j * dim..(j + 1) * dim].iter_mut().zip(x).for_each(|(g, xi)| *g += c * xi);
        }
    }
    for (g, t) in grad.iter_mut().zip(theta) {
        value -= 0.5 * lambda * t * t;
        *g -= lambda * t;
    }
    value
}

/// Maximizes the gate objective for fixed responsibilities.
pub fn m_step_gate(
    h: &Responsibilities,
    data: &Dataset,
    lambda_gate: f64,
    cfg: &OptimizerConfig,
    init: Option<&GatingModel>,
) -> Result<GatingModel> {
    let dim = data.m() + 1;
    let k = h.k();
    if k <= 1 {
        return Ok(GatingModel::zeros(k.max(1), dim));
    }
    let x0: Vec<f64> = match init {
        Some(g) if g.k() == k => g.theta.iter().flatten().copied().collect(),
        _ => vec![0.0; k * dim],
    };
    let res = minimize(x0, cfg, |t, g| {
        let v = gating_objective_into(t, h, data, lambda_gate, g);
        g.iter_mut().for_each(|gi| *gi = -*gi);
        -v
    })?;
    Ok(GatingModel {
        theta: res.x.chunks(dim).map(<[f64]>::to_vec).collect(),
    })
}

/// Refits expert `k` on column `k` of `h` as instance weights.
pub fn m_step_experts(
    h: &Responsibilities,
    data: &Dataset,
    structures: &[TreeStructure],
    lambda: f64,
    cfg: &OptimizerConfig,
    init: Option<&[CtbnExpert]>,
) -> Result<Vec<CtbnExpert>> {
    if structures.len() != h.k() {
        return Err(Error::Argument(format!("{} structures for {} responsibility columns", structures.len(), h.k())));
    }
    structures
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let warm = init.and_then(|e| e.get(k));
            train_parameters_from(s, data, &h.column(k), lambda, cfg, warm)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub lambda: f64,
    pub lambda_gate: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective improvement falls below this.
    pub tolerance: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            lambda: 1.0,
            lambda_gate: 1.0,
            max_iterations: 100,
            tolerance: 1e-5,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Allowed decrease of the EM objective before it is reported as a bug.
pub const EM_MONOTONICITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureModel,
    /// Regularized observed log-likelihood before the first and after every iteration.
    pub trace: Vec<f64>,
}

/// EM for fixed structures. `init` warm-starts experts and gate whose
/// shapes match; otherwise experts start from a unit-weight fit and the gate
/// from zeros.
pub fn em_fit(structures: &[TreeStructure], data: &Dataset, cfg: &EmConfig, init: Option<&MixtureModel>) -> Result<EmFit> {
    if structures.is_empty() {
        return Err(Error::Argument("em_fit needs at least one structure".into()));
    }
    let dim = data.m() + 1;
    let k = structures.len();
    let meta = ModelMeta {
        m: data.m(),
        d: data.d(),
        lambda: cfg.lambda,
        lambda_gate: cfg.lambda_gate,
        standardizer: None,
    };
    let mut model = match init {
        Some(m) if m.k() == k && m.structures() == structures && m.m() == data.m() && m.d() == data.d() => {
            MixtureModel::new(m.experts.clone(), m.gating.clone(), meta)?
        }
        _ => {
            let ones = vec![1.0; data.len()];
            let experts = structures
                .iter()
                .map(|s| train_parameters(s, data, &ones, cfg.lambda, &cfg.optimizer))
                .collect::<Result<Vec<_>>>()?;
            MixtureModel::new(experts, GatingModel::zeros(k, dim), meta)?
        }
    };

    let mut trace = vec![model.regularized_log_likelihood(data)];
    for iteration in 1..=cfg.max_iterations {
        let h = e_step(&model, data);
        let gating = m_step_gate(&h, data, cfg.lambda_gate, &cfg.optimizer, Some(&model.gating))?;
        let experts = m_step_experts(&h, data, structures, cfg.lambda, &cfg.optimizer, Some(&model.experts))?;
        model = MixtureModel::new(experts, gating, model.meta)?;
        let obj = model.regularized_log_likelihood(data);
        let prev = *trace.last().expect("trace is non-empty");
        trace.push(obj);
        if obj < prev - EM_MONOTONICITY_SLACK {
            return Err(Error::EmMonotonicity {
                iteration,
                decrease: prev - obj,
            });
        }
        log::debug!("EM iteration {iteration}: objective {obj}");
        if obj - prev <= cfg.tolerance * prev.abs() {
            break;
        }
    }
    Ok(EmFit { model, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowConfig {
    /// Upper bound on the number of experts; validation may stop earlier.
    pub max_experts: usize,
    /// Candidate CPD penalties; the best on the internal validation split wins.
    pub lambda_grid: Vec<f64>,
    /// Gate penalty; `None` uses the selected CPD penalty.
    pub lambda_gate: Option<f64>,
    /// Fraction of the internal training split held out for structure scoring.
    pub holdout_ratio: f64,
    /// Fraction of the data held out to decide when to stop growing.
    pub validation_ratio: f64,
    pub em_max_iterations: usize,
    pub em_tolerance: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            max_experts: 5,
            lambda_grid: vec![0.01, 0.1, 1.0, 10.0],
            lambda_gate: None,
            holdout_ratio: 0.25,
            validation_ratio: 0.2,
            em_max_iterations: 100,
            em_tolerance: 1e-5,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

impl GrowConfig {
    fn validate(&self) -> Result<()> {
        if self.max_experts < 1 {
            return Err(Error::Argument("max_experts must be >= 1".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Argument("lambda grid must be non-empty, finite and >= 0".into()));
        }
        self.optimizer.validate()
    }

    fn em(&self, lambda: f64) -> EmConfig {
        EmConfig {
            lambda,
            lambda_gate: self.lambda_gate.unwrap_or(lambda),
            max_iterations: self.em_max_iterations,
            tolerance: self.em_tolerance,
            optimizer: self.optimizer,
        }
    }
}

/// Deterministic sub-seed derivation (SplitMix64 finalizer).
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    MaxExperts,
    ValidationWorse,
    ZeroResidual,
}

/// One attempted addition to the mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthRound {
    pub experts: usize,
    pub structure: Vec<Option<usize>>,
    pub em_trace: Vec<f64>,
    pub validation_log_likelihood: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaCandidate {
    pub lambda: f64,
    /// Experts accepted when growing with this penalty.
    pub experts: usize,
    pub validation_log_likelihood: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthLog {
    pub lambda: f64,
    pub lambda_gate: f64,
    pub lambda_search: Vec<LambdaCandidate>,
    /// Growth rounds for the selected penalty.
    pub rounds: Vec<GrowthRound>,
    pub stop_reason: StopReason,
    pub final_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Growth {
    pub model: MixtureModel,
    pub log: GrowthLog,
}

fn margins(model: &MixtureModel, data: &Dataset) -> Vec<f64> {
    data.iter()
        .map(|i| (1.0 - model.log_prob(&i.features, &i.labels).exp()).max(0.0))
        .collect()
}

struct GrownOnSplit {
    model: MixtureModel,
    structures: Vec<TreeStructure>,
    rounds: Vec<GrowthRound>,
    stop_reason: StopReason,
    validation_log_likelihood: f64,
}

/// Growth loop for one penalty on the internal train / validation split.
fn grow_on_split(itrain: &Dataset, ivalid: &Dataset, lambda: f64, cfg: &GrowConfig) -> Result<GrownOnSplit> {
    let em = cfg.em(lambda);
    let uniform = WeightVector::uniform(itrain.len());
    let first = learn_structure(itrain, &uniform, lambda, cfg.holdout_ratio, derive_seed(cfg.seed, 2), &cfg.optimizer)?;
    let fit = em_fit(std::slice::from_ref(&first), itrain, &em, None)?;
    let mut best_ll = log_likelihood(&fit.model, ivalid);
    let mut rounds = vec![GrowthRound {
        experts: 1,
        structure: first.parents().to_vec(),
        em_trace: fit.trace,
        validation_log_likelihood: best_ll,
        accepted: true,
    }];
    let mut structures = vec![first];
    let mut model = fit.model;
    let mut stop_reason = StopReason::MaxExperts;

    while structures.len() < cfg.max_experts {
        let omega = match WeightVector::new(margins(&model, itrain))?.normalized() {
            Ok(w) => w,
            Err(_) => {
                stop_reason = StopReason::ZeroResidual;
                break;
            }
        };
        let round = structures.len() as u64 + 1;
        let structure = learn_structure(itrain, &omega, lambda, cfg.holdout_ratio, derive_seed(cfg.seed, 2 + round), &cfg.optimizer)?;
        let new_expert = train_parameters(&structure, itrain, omega.rescaled_to_mean_one().as_slice(), lambda, &cfg.optimizer)?;

        let mut experts = model.experts.clone();
        experts.push(new_expert);
        let mut gating = model.gating.clone();
        gating.theta.push(vec![0.0; itrain.m() + 1]);
        let init = MixtureModel::new(experts, gating, model.meta.clone())?;
        let mut candidate_structures = structures.clone();
        candidate_structures.push(structure.clone());
        let fit = em_fit(&candidate_structures, itrain, &em, Some(&init))?;
        let ll = log_likelihood(&fit.model, ivalid);
        let accepted = ll >= best_ll;
        rounds.push(GrowthRound {
            experts: candidate_structures.len(),
            structure: structure.parents().to_vec(),
            em_trace: fit.trace,
            validation_log_likelihood: ll,
            accepted,
        });
        if !accepted {
            stop_reason = StopReason::ValidationWorse;
            break;
        }
        best_ll = ll;
        structures = candidate_structures;
        model = fit.model;
    }
    Ok(GrownOnSplit {
        model,
        structures,
        rounds,
        stop_reason,
        validation_log_likelihood: best_ll,
    })
}

/// Builds the mixture one expert at a time.
///
/// Structures and parameters are learned on an internal training split and
/// the mixture stops growing as soon as an added expert lowers the
/// log-likelihood of the internal validation split. This is repeated for
/// every penalty in the grid; the penalty whose mixture scores best on the
/// validation split wins (ties go to the larger penalty). Its structures are
/// then refitted by EM on all of `data`.
pub fn grow_mixture(data: &Dataset, cfg: &GrowConfig) -> Result<Growth> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 instances to grow a mixture, got {}", data.len())));
    }
    let (train_idx, valid_idx) = holdout_indices(data.len(), cfg.validation_ratio, derive_seed(cfg.seed, 1))?;
    let itrain = data.select(&train_idx)?;
    let ivalid = data.select(&valid_idx)?;

    let mut grid = cfg.lambda_grid.clone();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite grid"));
    let mut lambda_search = Vec::new();
    let mut best: Option<(f64, GrownOnSplit)> = None;
    for &lambda in &grid {
        let grown = grow_on_split(&itrain, &ivalid, lambda, cfg)?;
        log::debug!(
            "lambda {lambda}: {} expert(s), validation log-likelihood {}",
            grown.structures.len(),
            grown.validation_log_likelihood
        );
        lambda_search.push(LambdaCandidate {
            lambda,
            experts: grown.structures.len(),
            validation_log_likelihood: grown.validation_log_likelihood,
        });
        if best
            .as_ref()
            .is_none_or(|(_, b)| grown.validation_log_likelihood > b.validation_log_likelihood)
        {
            best = Some((lambda, grown));
        }
    }
    let (lambda, grown) = best.expect("grid is non-empty");
    let em = cfg.em(lambda);
    let final_fit = em_fit(&grown.structures, data, &em, Some(&grown.model))?;
    Ok(Growth {
        model: final_fit.model,
        log: GrowthLog {
            lambda,
            lambda_gate: em.lambda_gate,
            lambda_search,
            rounds: grown.rounds,
            stop_reason: grown.stop_reason,
            final_trace: final_fit.trace,
        },
    })
}

/// End-to-end training options: mixture growth plus feature scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grow: GrowConfig,
    /// Z-score features with statistics of the training data.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grow: GrowConfig::default(),
            standardize: true,
        }
    }
}

/// Trains a mixture on raw data. The returned model applies its own feature
/// scaling in [`MixtureModel::prepare`].
pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<Growth> {
    let standardizer = cfg.standardize.then(|| Standardizer::fit(data));
    let prepared = match &standardizer {
        Some(s) => s.transform(data)?,
        None => data.clone(),
    };
    let mut growth = grow_mixture(&prepared, &cfg.grow)?;
    growth.model.meta.standardizer = standardizer;
    Ok(growth)
}

/// Current version of the JSON model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "mlme-model";

#[derive(Debug, Serialize, Deserialize)]
struct ExpertDoc {
    parents: Vec<Option<usize>>,
    /// One parameter vector for a root node, two (parent = 0, parent = 1) otherwise.
    cpds: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    m: usize,
    d: usize,
    k: usize,
    lambda: f64,
    lambda_gate: f64,
    experts: Vec<ExpertDoc>,
    gating: Vec<Vec<f64>>,
    standardizer: Option<Standardizer>,
}

impl MixtureModel {
    pub fn to_json(&self) -> String {
        use crate::ctbn::Cpd;
        let experts = self
            .experts
            .iter()
            .map(|e| ExpertDoc {
                parents: e.structure.parents().to_vec(),
                cpds: e
                    .cpds
                    .iter()
                    .map(|c| match c {
                        Cpd::Root(m) => vec![m.params.clone()],
                        Cpd::Conditional { parent_zero, parent_one } => {
                            vec![parent_zero.params.clone(), parent_one.params.clone()]
                        }
                    })
                    .collect(),
            })
            .collect();
        let doc = ModelDoc {
            format: MODEL_FORMAT_NAME.into(),
            version: MODEL_FORMAT_VERSION,
            m: self.meta.m,
            d: self.meta.d,
            k: self.k(),
            lambda: self.meta.lambda,
            lambda_gate: self.meta.lambda_gate,
            experts,
            gating: self.gating.theta.clone(),
            standardizer: self.meta.standardizer.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        use crate::ctbn::Cpd;
        use crate::logreg::LinearModel;
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format != MODEL_FORMAT_NAME {
            return Err(Error::Format(format!("unexpected format tag `{}`", doc.format)));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", doc.version)));
        }
        if doc.experts.len() != doc.k {
            return Err(Error::Format(format!("k = {} but {} experts stored", doc.k, doc.experts.len())));
        }
        let lm = |params: Vec<f64>| LinearModel {
            params,
            lambda: doc.lambda,
        };
        let mut experts = Vec::with_capacity(doc.k);
        for e in doc.experts {
            let structure = TreeStructure::new(e.parents).map_err(|err| Error::Format(err.to_string()))?;
            let cpds = e
                .cpds
                .into_iter()
                .map(|mut v| match v.len() {
                    1 => Ok(Cpd::Root(lm(v.pop().expect("one entry")))),
                    2 => {
                        let one = v.pop().expect("two entries");
                        let zero = v.pop().expect("two entries");
                        Ok(Cpd::Conditional {
                            parent_zero: lm(zero),
                            parent_one: lm(one),
                        })
                    }
                    n => Err(Error::Format(format!("CPD with {n} parameter vectors"))),
                })
                .collect::<Result<Vec<_>>>()?;
            experts.push(CtbnExpert::new(structure, cpds).map_err(|err| Error::Format(err.to_string()))?);
        }
        MixtureModel::new(
            experts,
            GatingModel { theta: doc.gating },
            ModelMeta {
                m: doc.m,
                d: doc.d,
                lambda: doc.lambda,
                lambda_gate: doc.lambda_gate,
                standardizer: doc.standardizer,
            },
        )
    }
}
