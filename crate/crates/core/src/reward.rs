//! Alignment reward and discounted returns.
//!
//! The reward of a transition is
//! `sum over c in C(s_next) of w_c * conf(s_next, c) * (phi(s_next, c) - phi(s_prev, c))`,
//! where `phi` is the ALIGNED indicator and components absent from `s_prev`
//! count as NOT_ALIGNED there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{aligned_indicator, check_successor, Dimension, LearnerState};

/// Per-dimension component weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    #[serde(rename = "O_L")]
    pub long_term: f64,
    #[serde(rename = "O_S")]
    pub short_term: f64,
    #[serde(rename = "M_I")]
    pub implicit: f64,
    #[serde(rename = "M_E")]
    pub explicit: f64,
    /// Zero out negative (regression) terms. Off by default.
    #[serde(default)]
    pub clamp_negative: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl RewardWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            long_term: w,
            short_term: w,
            implicit: w,
            explicit: w,
            clamp_negative: false,
        }
    }

    pub fn new(per_dimension: [f64; 4]) -> Result<Self> {
        if per_dimension.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reward weights must be finite and non-negative, got {per_dimension:?}"
            )));
        }
        Ok(Self {
            long_term: per_dimension[0],
            short_term: per_dimension[1],
            implicit: per_dimension[2],
            explicit: per_dimension[3],
            clamp_negative: false,
        })
    }

    pub fn weight(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::LongTermObjective => self.long_term,
            Dimension::ShortTermObjective => self.short_term,
            Dimension::ImplicitMotivation => self.implicit,
            Dimension::ExplicitMotivation => self.explicit,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            long_term: self.long_term * factor,
            short_term: self.short_term * factor,
            implicit: self.implicit * factor,
            explicit: self.explicit * factor,
            clamp_negative: self.clamp_negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTerm {
    pub component_id: String,
    pub dimension: Dimension,
    pub delta: i8,
    pub confidence_used: f64,
    pub weight: f64,
    pub term_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub contributions: Vec<RewardTerm>,
}

impl RewardBreakdown {
    /// Reward attributed to one dimension.
    pub fn dimension_total(&self, dim: Dimension) -> f64 {
        self.contributions
            .iter()
            .filter(|t| t.dimension == dim)
            .map(|t| t.term_value)
            .sum()
    }
}

pub fn compute_reward(
    s_prev: &LearnerState,
    s_next: &LearnerState,
    weights: &RewardWeights,
) -> Result<RewardBreakdown> {
    check_successor(s_prev, s_next)?;
    let mut out = RewardBreakdown::default();
    for c in s_next.components() {
        let delta = aligned_indicator(s_next, &c.id) as i8 - aligned_indicator(s_prev, &c.id) as i8;
        let weight = weights.weight(c.dimension);
        let mut term_value = weight * c.confidence * delta as f64;
        if weights.clamp_negative && term_value < 0.0 {
            term_value = 0.0;
        }
        out.total += term_value;
        out.contributions.push(RewardTerm {
            component_id: c.id.clone(),
            dimension: c.dimension,
            delta,
            confidence_used: c.confidence,
            weight,
            term_value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DiscountFactor(f64);

impl DiscountFactor {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "discount factor {gamma} outside [0, 1]"
            )));
        }
        Ok(Self(gamma))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DiscountFactor {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscountFactor> for f64 {
    fn from(g: DiscountFactor) -> f64 {
        g.0
    }
}

/// `sum_{t=1..T} gamma^(t-1) R_t`.
pub fn cumulative_return(rewards: &[f64], gamma: DiscountFactor) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma.get();
    }
    total
}

/// Discounted reward-to-go for every position of `rewards`.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}
