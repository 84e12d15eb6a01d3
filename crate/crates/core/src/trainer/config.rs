use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Mode;
use crate::nn::AdamConfig;

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Hard cap `T` on outer iterations.
    pub iterations: usize,
    /// Minibatch size `M`.
    pub batch_size: usize,
    /// Critic updates `L` per outer iteration.
    pub critic_steps: usize,
    /// Gradient-penalty weight `λ_GP`.
    pub gp_weight: f64,
    pub critic_adam: AdamConfig,
    /// Optimizer for the encoder and generator.
    pub model_adam: AdamConfig,
    pub seed: u64,
    /// Length of the trailing windows compared by the plateau rule.
    pub window: usize,
    /// Relative change below which the loss counts as converged; `0`
    /// disables the rule so exactly `iterations` steps run.
    pub tolerance: f64,
    /// Weight of the MMD term in WAE mode.
    pub wae_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Lwgan,
            iterations: 3000,
            batch_size: 256,
            critic_steps: 5,
            gp_weight: 5.0,
            critic_adam: AdamConfig::default(),
            model_adam: AdamConfig::default(),
            seed: 0,
            window: 200,
            tolerance: 1e-3,
            wae_lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.critic_steps == 0 {
            return bad("critic_steps must be at least 1".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(self.gp_weight >= 0.0 && self.gp_weight.is_finite()) {
            return bad(format!("gp_weight must be finite and ≥ 0, got {}", self.gp_weight));
        }
        if !(self.tolerance >= 0.0) {
            return bad(format!("tolerance must be ≥ 0, got {}", self.tolerance));
        }
        if !(self.wae_lambda >= 0.0) {
            return bad(format!("wae_lambda must be ≥ 0, got {}", self.wae_lambda));
        }
        for (name, adam) in [("critic_adam", &self.critic_adam), ("model_adam", &self.model_adam)] {
            let ok = adam.lr > 0.0
                && (0.0..1.0).contains(&adam.beta1)
                && (0.0..1.0).contains(&adam.beta2)
                && adam.eps > 0.0;
            if !ok {
                return bad(format!("{name} has invalid settings {adam:?}"));
            }
        }
        Ok(())
    }
}

/// Plateau rule: at every multiple of `window`, compares the mean of the
/// latest `window` losses with the mean of the block before it and fires
/// when they differ by less than `tolerance` relative to the earlier mean.
/// Checking only at block boundaries keeps batch noise from triggering it.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    window: usize,
    tolerance: f64,
    values: Vec<f64>,
}

impl ConvergenceMonitor {
    pub fn new(window: usize, tolerance: f64) -> Self {
        Self {
            window: window.max(1),
            tolerance,
            values: Vec::new(),
        }
    }

    /// Records a loss value; returns whether the rule fires now.
    pub fn push(&mut self, value: f64) -> bool {
        self.values.push(value);
        let k = self.values.len();
        let w = self.window;
        if self.tolerance <= 0.0 || k < 2 * w || k % w != 0 {
            return false;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let current = mean(&self.values[k - w..]);
        let previous = mean(&self.values[k - 2 * w..k - w]);
        (current - previous).abs() < self.tolerance * previous.abs()
    }
}
