//! Most probable label vector under a mixture.
//!
//! Every expert's exact MAP is a candidate start; the best one under the
//! mixture seeds a simulated-annealing walk over single-label flips. The
//! best state seen on the walk is returned, so the answer is never worse than
//! the start and is exact for a single expert.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctbn::{max_sum, tables_log_prob, NodeTable};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mixture::{derive_seed, log_sum_exp, MixtureModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub initial_temperature: f64,
    /// Geometric factor applied to the temperature after every step.
    pub cooling_rate: f64,
    pub seed: u64,
}

/// Temperature reached at the end of a default schedule.
pub const FINAL_TEMPERATURE: f64 = 1e-3;

impl AnnealConfig {
    /// Schedule cooling from `1.0` to [`FINAL_TEMPERATURE`] in `iterations` steps.
    pub fn with_iterations(iterations: usize, seed: u64) -> Self {
        let iterations = iterations.max(1);
        AnnealConfig {
            iterations,
            initial_temperature: 1.0,
            cooling_rate: FINAL_TEMPERATURE.powf(1.0 / iterations as f64),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Argument("anneal iterations must be >= 1".into()));
        }
        if !(self.initial_temperature > 0.0) || !self.initial_temperature.is_finite() {
            return Err(Error::Argument("initial temperature must be > 0".into()));
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::Argument("cooling rate must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig::with_iterations(150, 0)
    }
}

/// Per-input log-probability tables for all experts. Scoring a label
/// vector costs `O(K d)` and matches [`MixtureModel::log_prob`] exactly.
pub struct Scorer<'a> {
    model: &'a MixtureModel,
    log_gate: Vec<f64>,
    tables: Vec<Vec<NodeTable>>,
    buf: Vec<f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a MixtureModel, x: &[f64]) -> Self {
        Scorer {
            model,
            log_gate: model.gating.log_probs(x),
            tables: model.experts.iter().map(|e| e.node_tables(x)).collect(),
            buf: vec![0.0; model.k()],
        }
    }

    pub fn score(&mut self, y: &[bool]) -> f64 {
        for (k, e) in self.model.experts.iter().enumerate() {
            self.buf[k] = self.log_gate[k] + tables_log_prob(&e.structure, &self.tables[k], y);
        }
        log_sum_exp(&self.buf)
    }

    /// Exact MAP of each expert, in expert order.
    pub fn expert_maps(&self) -> Vec<Vec<bool>> {
        self.model
            .experts
            .iter()
            .zip(&self.tables)
            .map(|(e, t)| max_sum(&e.structure, t))
            .collect()
    }
}

fn best_candidate(scorer: &mut Scorer<'_>) -> (Vec<bool>, f64) {
    let mut best: Option<(Vec<bool>, f64)> = None;
    for y in scorer.expert_maps() {
        let lp = scorer.score(&y);
        if best.as_ref().is_none_or(|(_, b)| lp > *b) {
            best = Some((y, lp));
        }
    }
    best.expect("mixture has at least one expert")
}

/// Best per-expert MAP under the mixture. Ties keep the earlier expert.
pub fn heuristic_init(model: &MixtureModel, x: &[f64]) -> Vec<bool> {
    best_candidate(&mut Scorer::new(model, x)).0
}

/// Annealed MAP search. Returns the label vector and its mixture log-probability.
pub fn map_predict(model: &MixtureModel, x: &[f64], cfg: &AnnealConfig) -> (Vec<bool>, f64) {
    let mut scorer = Scorer::new(model, x);
    let (mut y, mut cur) = best_candidate(&mut scorer);
    let d = y.len();
    let (mut best_y, mut best) = (y.clone(), cur);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut temperature = cfg.initial_temperature;
    for _ in 0..cfg.iterations {
        let i = rng.gen_range(0..d);
        y[i] = !y[i];
        let lp = scorer.score(&y);
        let delta = lp - cur;
        if delta >= 0.0 || rng.gen::<f64>() < (delta / temperature).exp() {
            cur = lp;
            if cur > best {
                best = cur;
                best_y.copy_from_slice(&y);
            }
        } else {
            y[i] = !y[i];
        }
        temperature *= cfg.cooling_rate;
    }
    (best_y, best)
}

/// Largest label count accepted by [`enumerate_map`].
pub const ENUMERATION_LIMIT: usize = 20;

/// Exhaustive MAP over all `2^d` label vectors. Ties go to the
/// lexicographically smallest vector (label 0 most significant).
pub fn enumerate_map(model: &MixtureModel, x: &[f64]) -> Result<(Vec<bool>, f64)> {
    let d = model.d();
    if d > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            d,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut scorer = Scorer::new(model, x);
    let mut y = vec![false; d];
    let mut best = (y.clone(), f64::NEG_INFINITY);
    for mask in 0u64..(1u64 << d) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = mask >> (d - 1 - i) & 1 == 1;
        }
        let lp = scorer.score(&y);
        if lp > best.1 {
            best = (y.clone(), lp);
        }
    }
    Ok(best)
}

/// MAP predictions for every instance of already prepared data. Instance
/// `n` anneals with a seed derived from `cfg.seed` and `n`, so results do not
/// depend on batch composition order.
pub fn predict_all(model: &MixtureModel, data: &Dataset, cfg: &AnnealConfig) -> Result<Vec<(Vec<bool>, f64)>> {
    cfg.validate()?;
    if data.m() != model.m() || data.d() != model.d() {
        return Err(Error::Schema(format!(
            "model expects (m, d) = ({}, {}), data has ({}, {})",
            model.m(),
            model.d(),
            data.m(),
            data.d()
        )));
    }
    Ok(data
        .iter()
        .enumerate()
        .map(|(n, inst)| {
            let c = AnnealConfig {
                seed: derive_seed(cfg.seed, n as u64),
                ..*cfg
            };
            map_predict(model, &inst.features, &c)
        })
        .collect())
}
