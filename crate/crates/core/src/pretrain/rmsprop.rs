use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            learning_rate: 0.001,
            decay: 0.9,
            epsilon: 1e-6,
        }
    }
}

/// Running mean of squared gradients, one slot per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    mean_square: Vec<Vec<f64>>,
}

impl RmspropState {
    pub fn new<'a>(tensors: impl IntoIterator<Item = &'a [f64]>) -> Self {
        RmspropState {
            mean_square: tensors.into_iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn mean_square(&self) -> &[Vec<f64>] {
        &self.mean_square
    }

    /// Updates every tensor in place; `params` and `grads` follow the order
    /// the state was created with.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, config: &RmspropConfig) {
        assert_eq!(params.len(), self.mean_square.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.mean_square.len(), "tensor count mismatch");
        for ((p, g), ms) in params.into_iter().zip(grads).zip(&mut self.mean_square) {
            rmsprop_step(p, g, ms, config);
        }
    }
}

/// `ms ← ρ·ms + (1−ρ)·g²`, then `θ ← θ − η·g / √(ms + ε)`, elementwise.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], mean_square: &mut [f64], config: &RmspropConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient shape mismatch");
    assert_eq!(params.len(), mean_square.len(), "parameter/state shape mismatch");
    let rho = config.decay;
    for ((p, &g), ms) in params.iter_mut().zip(grads).zip(mean_square.iter_mut()) {
        *ms = rho * *ms + (1.0 - rho) * g * g;
        *p -= config.learning_rate * g / (*ms + config.epsilon).sqrt();
    }
}
