//! Behavioural cloning followed by group-relative policy optimisation.

mod gradcheck;
mod grpo;
mod sft;
mod value;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::grad_check;
pub use grpo::{
    fit_group_value, grpo_advantages, grpo_objective, grpo_objective_and_grad, grpo_step, normalize_advantages, sample_group, train_grpo,
    GrpoEpochLog, GrpoOutcome,
};
pub use sft::{sft_examples, sft_loss, sft_loss_and_grad, train_sft, SftEpochLog, SftExample, SftOutcome};
pub use value::{fit_value, fit_value_samples, value_samples};

pub use crate::rollout::TrajectoryStep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SftConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub group_size: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub clip_ratio: Option<f64>,
    /// Learners sampled per epoch; each contributes one group.
    pub groups_per_epoch: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 30,
            group_size: 8,
            horizon: 5,
            gamma: 0.9,
            epsilon: 1e-8,
            clip_ratio: None,
            groups_per_epoch: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub sft: SftConfig,
    pub grpo: GrpoConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let (s, g) = (&self.sft, &self.grpo);
        if !(s.learning_rate >= 0.0) || !(g.learning_rate >= 0.0) {
            return bad("learning rates must be non-negative".into());
        }
        if s.batch_size == 0 {
            return bad("sft batch_size must be at least 1".into());
        }
        if g.group_size < 2 {
            return bad(format!("group_size must be at least 2, got {}", g.group_size));
        }
        if g.horizon == 0 || g.groups_per_epoch == 0 {
            return bad("grpo horizon and groups_per_epoch must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&g.gamma) {
            return bad(format!("gamma {} outside [0, 1]", g.gamma));
        }
        if !(g.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if let Some(c) = g.clip_ratio {
            if !(c > 0.0 && c < 1.0) {
                return bad(format!("clip_ratio {c} outside (0, 1)"));
            }
        }
        Ok(())
    }
}
