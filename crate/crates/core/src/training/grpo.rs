//! Group-relative policy optimisation over simulated episodes.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::value::fit_value;
use super::GrpoConfig;
use crate::corpus::KnowledgeCorpus;
use crate::error::{Error, Result};
use crate::policy::{log_softmax, softmax, value_of_features, PolicyParams, ValueParams, FEATURE_DIM};
use crate::rng;
use crate::rollout::{run_episode, Chooser, EpisodeConfig, TrajectoryStep};
use crate::sim::SimLearner;

/// One trajectory per env, sampled from `params_old`; trajectory `i` draws
/// from its own stream of `seed`.
pub fn sample_group(
    params_old: &PolicyParams,
    value: &ValueParams,
    envs: &[SimLearner],
    corpus: &KnowledgeCorpus,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<Vec<Vec<TrajectoryStep>>> {
    envs.par_iter()
        .enumerate()
        .map(|(i, env)| {
            let mut rng = rng::rng_for(seed, i as u64);
            run_episode(env, corpus, Chooser::Sample(params_old), Some(params_old), value, cfg, &mut rng)
                .map(|ep| ep.steps)
        })
        .collect()
}

/// `A_t = R_t + gamma V(s_{t+1}) - V(s_t)`, standardised with the mean and
/// population standard deviation over every step of the group.
pub fn grpo_advantages(group: &[Vec<TrajectoryStep>], gamma: f64, epsilon: f64) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = group
        .iter()
        .map(|traj| traj.iter().map(|s| s.reward + gamma * s.value_s_next - s.value_s).collect())
        .collect();
    normalize_advantages(&raw, epsilon)
}

pub fn normalize_advantages(raw: &[Vec<f64>], epsilon: f64) -> Vec<Vec<f64>> {
    let n = raw.iter().map(Vec::len).sum::<usize>();
    if n == 0 {
        return raw.to_vec();
    }
    let mean = raw.iter().flatten().sum::<f64>() / n as f64;
    let var = raw.iter().flatten().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let denom = var.sqrt() + epsilon;
    raw.iter()
        .map(|t| t.iter().map(|a| (a - mean) / denom).collect())
        .collect()
}

fn check_alignment(group: &[Vec<TrajectoryStep>], advantages: &[Vec<f64>]) -> Result<()> {
    let aligned = group.len() == advantages.len() && group.iter().zip(advantages).all(|(g, a)| g.len() == a.len());
    if aligned {
        Ok(())
    } else {
        Err(Error::InvalidArgument("advantages do not line up with group steps".into()))
    }
}

/// Largest exponent passed to `exp` when forming ratios.
const MAX_LOG_RATIO: f64 = 700.0;

/// `mean_t ratio_t * A_t` with `ratio_t = pi(k_t|s_t) / pi_old(k_t|s_t)`,
/// optionally clipped to `[1 - c, 1 + c]`, and its gradient in theta.
pub fn grpo_objective_and_grad(
    params: &PolicyParams,
    group: &[Vec<TrajectoryStep>],
    advantages: &[Vec<f64>],
    clip_ratio: Option<f64>,
) -> Result<(f64, [f64; FEATURE_DIM])> {
    check_alignment(group, advantages)?;
    let n = group.iter().map(Vec::len).sum::<usize>();
    let mut obj = 0.0;
    let mut grad = [0.0; FEATURE_DIM];
    if n == 0 {
        return Ok((obj, grad));
    }
    for (step, adv) in group.iter().flatten().zip(advantages.iter().flatten()) {
        let logits = params.logits(&step.features);
        let lp = log_softmax(&logits)[step.chosen];
        let ratio = (lp - step.log_prob_old).min(MAX_LOG_RATIO).exp();
        let (r, active) = match clip_ratio {
            Some(c) if ratio < 1.0 - c => (1.0 - c, false),
            Some(c) if ratio > 1.0 + c => (1.0 + c, false),
            _ => (ratio, true),
        };
        obj += r * adv;
        if active && *adv != 0.0 {
            // d ratio = ratio * d log pi = ratio * (f_k - E_p f) / tau
            let probs = softmax(&logits);
            let coef = ratio * adv / params.temperature;
            let chosen = &step.features[step.chosen].0;
            for j in 0..FEATURE_DIM {
                let expect: f64 = probs.iter().zip(&step.features).map(|(p, f)| p * f.0[j]).sum();
                grad[j] += coef * (chosen[j] - expect);
            }
        }
    }
    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((obj * scale, grad))
}

pub fn grpo_objective(
    params: &PolicyParams,
    group: &[Vec<TrajectoryStep>],
    advantages: &[Vec<f64>],
    clip_ratio: Option<f64>,
) -> Result<f64> {
    Ok(grpo_objective_and_grad(params, group, advantages, clip_ratio)?.0)
}

/// One ascent step on the objective.
pub fn grpo_step(
    params: &PolicyParams,
    group: &[Vec<TrajectoryStep>],
    advantages: &[Vec<f64>],
    cfg: &GrpoConfig,
) -> Result<(PolicyParams, [f64; FEATURE_DIM])> {
    let (_, grad) = grpo_objective_and_grad(params, group, advantages, cfg.clip_ratio)?;
    let mut next = params.clone();
    for (t, g) in next.theta.iter_mut().zip(grad) {
        *t += cfg.learning_rate * g;
    }
    Ok((next, grad))
}

/// Fits the value baseline on `group` and rewrites every step's value
/// estimates with it (the final successor of each trajectory stays 0).
pub fn fit_group_value(group: &mut [Vec<TrajectoryStep>], gamma: f64) -> Result<ValueParams> {
    let value = fit_value(group, gamma)?;
    for traj in group.iter_mut() {
        let last = traj.len().saturating_sub(1);
        for (i, s) in traj.iter_mut().enumerate() {
            s.value_s = value_of_features(&value, &s.state_features);
            s.value_s_next = if i == last { 0.0 } else { value_of_features(&value, &s.next_state_features) };
        }
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoEpochLog {
    pub epoch: usize,
    /// Mean discounted return of the epoch's sampled trajectories.
    pub mean_return: f64,
    /// Negated surrogate objective after the update.
    pub loss: f64,
    pub grad_norm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrpoOutcome {
    pub params: PolicyParams,
    pub value: ValueParams,
    pub log: Vec<GrpoEpochLog>,
}

/// Per epoch: pick `groups_per_epoch` learners, sample a group of
/// `group_size` trajectories for each, fit the value baseline on all of
/// them, normalise advantages within each group and take one ascent step.
pub fn train_grpo(
    params_sft: &PolicyParams,
    learners: &[SimLearner],
    corpus: &KnowledgeCorpus,
    cfg: &GrpoConfig,
    episode: &EpisodeConfig,
    seed: u64,
) -> Result<GrpoOutcome> {
    params_sft.validate()?;
    if learners.is_empty() {
        return Err(Error::InvalidArgument("grpo needs at least one learner".into()));
    }
    let ep_cfg = EpisodeConfig {
        horizon: cfg.horizon,
        gamma: cfg.gamma,
        ..episode.clone()
    };
    let mut params = params_sft.clone();
    let mut value = ValueParams::default();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let epoch_seed = rng::derive(seed, epoch as u64);
        let picks: Vec<usize> = if cfg.groups_per_epoch <= learners.len() {
            index::sample(&mut rng::rng_from(epoch_seed), learners.len(), cfg.groups_per_epoch).into_vec()
        } else {
            (0..cfg.groups_per_epoch).map(|g| g % learners.len()).collect()
        };
        let mut groups: Vec<Vec<Vec<TrajectoryStep>>> = picks
            .iter()
            .enumerate()
            .map(|(g, &li)| {
                let envs = vec![learners[li].clone(); cfg.group_size];
                sample_group(&params, &value, &envs, corpus, &ep_cfg, rng::derive(epoch_seed, 1 + g as u64))
            })
            .collect::<Result<_>>()?;

        let returns: Vec<f64> = groups
            .iter()
            .flatten()
            .map(|t| t.iter().rev().fold(0.0, |acc, s| s.reward + cfg.gamma * acc))
            .collect();
        let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;

        let mut all: Vec<Vec<TrajectoryStep>> = groups.iter_mut().flat_map(std::mem::take).collect();
        if all.iter().any(|t| !t.is_empty()) {
            value = fit_group_value(&mut all, cfg.gamma)?;
        }
        let mut advantages = Vec::with_capacity(all.len());
        for chunk in all.chunks(cfg.group_size) {
            advantages.extend(grpo_advantages(chunk, cfg.gamma, cfg.epsilon));
        }
        let (next, grad) = grpo_step(&params, &all, &advantages, cfg)?;
        let loss = -grpo_objective(&next, &all, &advantages, cfg.clip_ratio)?;
        if !mean_return.is_finite() || next.validate().is_err() || !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_good: Box::new(params),
            });
        }
        params = next;
        log.push(GrpoEpochLog {
            epoch,
            mean_return,
            loss,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            seed,
        });
    }
    Ok(GrpoOutcome { params, value, log })
}
