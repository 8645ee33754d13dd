//! Instance-weighted, L2-regularized binary logistic regression.
//!
//! The objective maximized by [`train_weighted`] is
//!
//! ```text
//! sum_n w_n log P(t_n | x_n; params) - (lambda / 2) * ||params[1..]||^2
//! ```
//!
//! The bias (index 0) is not penalized.

use serde::{Deserialize, Serialize};

use crate::dataset::fold_indices;
use crate::error::{Error, Result};
use crate::optim::{dot, minimize};

pub use crate::optim::OptimizerConfig;

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(z))`, accurate in both tails.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub params: Vec<f64>,
    pub lambda: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        LinearModel {
            params: vec![0.0; dim],
            lambda,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.params, x)
    }

    /// `P(t = 1 | x)`.
    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    /// `log P(t | x)`.
    pub fn log_prob(&self, x: &[f64], t: bool) -> f64 {
        let z = self.score(x);
        if t {
            log_sigmoid(z)
        } else {
            log_sigmoid(-z)
        }
    }

    /// Both `(log P(t = 0 | x), log P(t = 1 | x))`.
    pub fn log_probs(&self, x: &[f64]) -> (f64, f64) {
        let z = self.score(x);
        (log_sigmoid(-z), log_sigmoid(z))
    }
}

pub fn predict_prob(model: &LinearModel, x: &[f64]) -> f64 {
    model.predict_prob(x)
}

/// Weighted binary training problem over borrowed feature rows.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub rows: Vec<&'a [f64]>,
    pub targets: Vec<bool>,
    pub weights: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(rows: Vec<&'a [f64]>, targets: Vec<bool>, weights: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} rows, {} targets, {} weights",
                rows.len(),
                targets.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Argument(format!("invalid instance weight {w}")));
        }
        if let Some(dim) = rows.first().map(|r| r.len()) {
            if rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Argument("feature rows differ in length".into()));
            }
        }
        Ok(Problem { rows, targets, weights })
    }

    /// Drops zero-weight rows; they contribute nothing to the objective.
    fn compact(self) -> Self {
        if self.weights.iter().all(|&w| w > 0.0) {
            return self;
        }
        let mut out = Problem {
            rows: Vec::new(),
            targets: Vec::new(),
            weights: Vec::new(),
        };
        for ((r, t), w) in self.rows.into_iter().zip(self.targets).zip(self.weights) {
            if w > 0.0 {
                out.rows.push(r);
                out.targets.push(t);
                out.weights.push(w);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Regularized weighted log-likelihood and its exact gradient.
pub fn objective_and_gradient(params: &[f64], problem: &Problem<'_>, lambda: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let value = objective_into(params, problem, lambda, &mut grad);
    (value, grad)
}

fn objective_into(params: &[f64], problem: &Problem<'_>, lambda: f64, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for ((x, &t), &w) in problem.rows.iter().zip(&problem.targets).zip(&problem.weights) {
        if w == 0.0 {
            continue;
        }
        let z = dot(params, x);
        let (ll, resid) = if t {
            (log_sigmoid(z), 1.0 - sigmoid(z))
        } else {
            (log_sigmoid(-z), -sigmoid(z))
        };
        value += w * ll;
        let c = w * resid;
        grad.iter_mut().zip(x.iter()).for_each(|(g, xi)| *g += c * xi);
    }
    for j in 1..params.len() {
        value -= 0.5 * lambda * params[j] * params[j];
        grad[j] -= lambda * params[j];
    }
    value
}

/// Fits a weighted logistic model from all-zero parameters.
pub fn train_weighted(problem: &Problem<'_>, dim: usize, lambda: f64, cfg: &OptimizerConfig) -> Result<LinearModel> {
    train_weighted_from(problem, vec![0.0; dim], lambda, cfg)
}

/// Fits a weighted logistic model starting from `init`.
pub fn train_weighted_from(
    problem: &Problem<'_>,
    init: Vec<f64>,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<LinearModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let problem = problem.clone().compact();
    if let Some(first) = problem.targets.first() {
        if problem.targets.iter().all(|t| t == first) {
            log::warn!(
                "degenerate logistic fit: all {} weighted targets are {}",
                problem.len(),
                u8::from(*first)
            );
        }
    }
    let result = minimize(init, cfg, |p, g| {
        let v = objective_into(p, &problem, lambda, g);
        g.iter_mut().for_each(|gi| *gi = -*gi);
        -v
    })?;
    log::trace!(
        "logistic fit: n = {}, {} iterations, {} evaluations, gradient norm {:.2e}, converged {}",
        problem.len(),
        result.iterations,
        result.evaluations,
        result.gradient_norm,
        result.converged
    );
    Ok(LinearModel {
        params: result.x,
        lambda,
    })
}

/// Picks the penalty from `grid` maximizing the weighted held-out
/// log-likelihood under seeded `folds`-fold cross-validation.
/// Ties go to the larger penalty.
pub fn select_lambda(
    problem: &Problem<'_>,
    dim: usize,
    grid: &[f64],
    folds: usize,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Argument("empty lambda grid".into()));
    }
    if grid.len() == 1 || problem.len() < folds.max(2) {
        return Ok(grid.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let parts = fold_indices(problem.len(), folds, seed)?;
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &lambda in grid {
        let mut score = 0.0;
        for held in &parts {
            let mut mask = vec![false; problem.len()];
            held.iter().for_each(|&i| mask[i] = true);
            let train = Problem {
                rows: (0..problem.len()).filter(|&i| !mask[i]).map(|i| problem.rows[i]).collect(),
                targets: (0..problem.len()).filter(|&i| !mask[i]).map(|i| problem.targets[i]).collect(),
                weights: (0..problem.len()).filter(|&i| !mask[i]).map(|i| problem.weights[i]).collect(),
            };
            let model = train_weighted(&train, dim, lambda, cfg)?;
            score += held
                .iter()
                .map(|&i| problem.weights[i] * model.log_prob(problem.rows[i], problem.targets[i]))
                .sum::<f64>();
        }
        if score > best.0 || (score == best.0 && lambda > best.1) {
            best = (score, lambda);
        }
    }
    Ok(best.1)
}
