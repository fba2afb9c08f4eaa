use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            tolerance: 1e-6,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            l2: 0.0,
        }
    }

    /// Finite for every finite `x`: huge inputs are rescaled so the dot
    /// product saturates to ±∞ instead of producing NaN.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let z = if scale > 1e100 {
            let unit: Vec<f64> = x.iter().map(|v| v / scale).collect();
            dot(&self.weights, &unit) * scale
        } else {
            dot(&self.weights, x)
        };
        sigmoid(z + self.bias)
    }
}

pub fn predict_proba_logistic(model: &LogisticModel, x: &[f64]) -> f64 {
    model.predict_proba(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LogisticModel,
    /// Objective value before the first step and after every accepted step.
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: &'a [&'a [f64]],
    y: Vec<f64>,
    l2: f64,
}

impl Problem<'_> {
    /// Mean log loss plus `l2/2·|w|²`; the bias is not penalized.
    fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.x.len() as f64;
        let data: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(x, &y)| {
                let z = dot(w, x) + b;
                softplus(z) - y * z
            })
            .sum();
        data / n + 0.5 * self.l2 * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.x.len() as f64;
        let mut gw: Vec<f64> = w.iter().map(|v| self.l2 * v).collect();
        let mut gb = 0.0;
        for (x, &y) in self.x.iter().zip(&self.y) {
            let r = (sigmoid(dot(w, x) + b) - y) / n;
            for (g, xi) in gw.iter_mut().zip(x.iter()) {
                *g += r * xi;
            }
            gb += r;
        }
        (gw, gb)
    }
}

/// Full-batch gradient descent with Armijo backtracking.
pub fn train_logistic(x: &[&[f64]], y: &[Label], config: &LogisticConfig) -> Result<LogisticFit> {
    check_training_set(x, y)?;
    if !(config.l2 >= 0.0) || !(config.tolerance > 0.0) {
        return Err(Error::Config("logistic l2 must be nonnegative and tolerance positive".into()));
    }
    let dim = x[0].len();
    let problem = Problem {
        x,
        y: y.iter().map(|l| f64::from(l.bit())).collect(),
        l2: config.l2,
    };
    let (mut w, mut b) = (vec![0.0; dim], 0.0);
    let mut loss = problem.loss(&w, b);
    let mut history = vec![loss];
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let (gw, gb) = problem.gradient(&w, b);
        let g2 = dot(&gw, &gw) + gb * gb;
        if g2.sqrt() < config.tolerance {
            converged = true;
            break;
        }
        step *= 2.0;
        let accepted = loop {
            let cw: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let cb = b - step * gb;
            let cand = problem.loss(&cw, cb);
            if cand <= loss - 0.5 * step * g2 {
                break Some((cw, cb, cand));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((cw, cb, cand)) = accepted else {
            converged = true;
            break;
        };
        w = cw;
        b = cb;
        loss = cand;
        history.push(loss);
    }
    Ok(LogisticFit {
        model: LogisticModel {
            weights: w,
            bias: b,
            l2: config.l2,
        },
        loss_history: history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(xs: &[Vec<f64>], ys: &[u8], cfg: LogisticConfig) -> LogisticFit {
        let x: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let y: Vec<Label> = ys.iter().map(|&b| Label::from_bit(b).unwrap()).collect();
        train_logistic(&x, &y, &cfg).unwrap()
    }

    #[test]
    fn closed_forms() {
        let mut m = LogisticModel::zeros(2);
        assert_eq!(m.predict_proba(&[3.0, -1.0]), 0.5);
        m.bias = 3f64.ln();
        assert!((predict_proba_logistic(&m, &[0.0, 0.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn symmetric_data_gives_zero_model() {
        let f = fit(&[vec![0.0], vec![0.0]], &[0, 1], LogisticConfig::default());
        assert_eq!(f.model.weights, [0.0]);
        assert!(f.model.bias.abs() < 1e-12);
        assert!((f.model.predict_proba(&[0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separable_line_is_learned_and_loss_never_rises() {
        let xs = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let f = fit(&xs, &[0, 0, 1, 1], LogisticConfig::default());
        assert!(f.model.predict_proba(&[-1.0]) < 0.5 && f.model.predict_proba(&[1.0]) > 0.5);
        assert!(f.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_rejected() {
        let x: Vec<&[f64]> = vec![&[1.0], &[2.0]];
        assert!(train_logistic(&x, &[Label::Clean, Label::Clean], &LogisticConfig::default()).is_err());
    }
}
