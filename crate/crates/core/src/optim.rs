//! Limited-memory BFGS for smooth unconstrained minimization.
//!
//! Used for every weighted logistic fit and for the gating softmax. The line
//! search is backtracking on the Armijo condition; a curvature pair is only
//! stored when `s·y` is positive, so the implicit inverse Hessian stays
//! positive definite. Accepted iterates never increase the objective.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            memory: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Argument("max_iterations must be >= 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Argument("gradient_tolerance must be > 0".into()));
        }
        if self.memory < 1 {
            return Err(Error::Argument("memory must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Objective evaluations, including rejected line-search trials.
    pub evaluations: usize,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimizes `f` starting at `x0`. `f` returns the value and writes the
/// gradient into its second argument.
pub fn minimize<F>(x0: Vec<f64>, cfg: &OptimizerConfig, mut f: F) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut evaluations = 1;
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { iteration: 0 });
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; cfg.memory];

    for iter in 0..cfg.max_iterations {
        let gnorm = norm(&g);
        if gnorm <= cfg.gradient_tolerance {
            return Ok(Minimum {
                x,
                value,
                gradient_norm: gnorm,
                iterations: iter,
                evaluations,
                converged: true,
            });
        }

        // Two-loop recursion: dir = -H g.
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (i, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha[i] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gnorm.max(1.0),
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (i, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            let a = alpha[i];
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }

        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // Not a descent direction; fall back to steepest descent.
            history.clear();
            let scale = 1.0 / gnorm.max(1.0);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi * scale);
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut new_value = value;
        for _ in 0..MAX_BACKTRACKS {
            x_new.iter_mut().zip(x.iter().zip(&dir)).for_each(|(xn, (xi, di))| *xn = xi + step * di);
            new_value = f(&x_new, &mut g_new);
            evaluations += 1;
            if new_value.is_finite() && new_value <= value + ARMIJO_C1 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // A step that does not strictly lower the value means the objective is
        // flat at floating-point resolution.
        if !accepted || !(new_value < value) || g_new.iter().any(|v| !v.is_finite()) {
            // No further progress at floating-point resolution.
            return Ok(Minimum {
                x,
                value,
                gradient_norm: gnorm,
                iterations: iter,
                evaluations,
                converged: false,
            });
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = new_value;
    }

    let gnorm = norm(&g);
    Ok(Minimum {
        x,
        value,
        gradient_norm: gnorm,
        iterations: cfg.max_iterations,
        evaluations,
        converged: gnorm <= cfg.gradient_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        // f = sum_i (i+1) (x_i - i)^2
        let cfg = OptimizerConfig::default();
        let m = minimize(vec![0.0; 5], &cfg, |x, g| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let c = (i + 1) as f64;
                v += c * (x[i] - i as f64).powi(2);
                g[i] = 2.0 * c * (x[i] - i as f64);
            }
            v
        })
        .unwrap();
        assert!(m.converged);
        for (i, xi) in m.x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn rosenbrock() {
        let cfg = OptimizerConfig {
            max_iterations: 2000,
            ..Default::default()
        };
        let m = minimize(vec![-1.2, 1.0], &cfg, |x, g| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        })
        .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = minimize(vec![0.0], &OptimizerConfig::default(), |_, g| {
            g[0] = 0.0;
            f64::NAN
        });
        assert!(matches!(r, Err(Error::Numeric { iteration: 0 })));
    }
}
