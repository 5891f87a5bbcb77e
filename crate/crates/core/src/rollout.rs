//! Episodes of a planner against a simulated learner.
//!
//! Every step re-profiles the learner from all interaction summaries so far,
//! retrieves candidates excluding already-taken actions, picks one, steps
//! the simulator and scores the transition.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::KnowledgeCorpus;
use crate::error::{Error, Result};
use crate::policy::{
    featurize_candidates, log_softmax, plan_next, sample_index, softmax, state_features, value_of_features, FeatureVector,
    PlanningEnv, PolicyParams, ValueParams, STATE_FEATURE_DIM,
};
use crate::profiler::{profile_from_summaries, profile_query, LearnerProfile, ProfilerConfig};
use crate::retrieval::{retrieve, RetrievalConfig};
use crate::reward::{compute_reward, RewardBreakdown, RewardWeights};
use crate::rng::Rng;
use crate::sim::{InteractionSummary, SimLearner};
use crate::state::LearnerState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub gamma: f64,
    pub retrieval: RetrievalConfig,
    pub weights: RewardWeights,
    pub profiler: ProfilerConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            gamma: 0.9,
            retrieval: RetrievalConfig::default(),
            weights: RewardWeights::default(),
            profiler: ProfilerConfig::default(),
        }
    }
}

/// How an episode picks actions.
#[derive(Debug, Clone, Copy)]
pub enum Chooser<'a> {
    /// Uniformly at random among the candidates.
    Uniform,
    /// The top-ranked retrieval candidate.
    RetrievalTop,
    /// A draw from the policy distribution.
    Sample(&'a PolicyParams),
    /// The highest-logit candidate.
    Greedy(&'a PolicyParams),
    /// One-step simulated reward plus discounted value.
    Lookahead(&'a ValueParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: LearnerState,
    pub next_state: LearnerState,
    pub profile: LearnerProfile,
    pub candidates: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub chosen: usize,
    pub log_prob_old: f64,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub state_features: [f64; STATE_FEATURE_DIM],
    pub next_state_features: [f64; STATE_FEATURE_DIM],
    pub value_s: f64,
    pub value_s_next: f64,
}

impl TrajectoryStep {
    pub fn chosen_id(&self) -> &str {
        &self.candidates[self.chosen]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub learner_id: String,
    pub steps: Vec<TrajectoryStep>,
    pub final_state: LearnerState,
}

impl Episode {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps.iter().rev().fold(0.0, |acc, s| s.reward + gamma * acc)
    }
}

/// Runs up to `cfg.horizon` steps; stops early when the candidate set runs
/// dry. The successor of the final step is valued at 0. `log_prob_old` is the log-probability of the choice under `behaviour`
/// when given, else 0.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    learner: &SimLearner,
    corpus: &KnowledgeCorpus,
    chooser: Chooser<'_>,
    behaviour: Option<&PolicyParams>,
    value: &ValueParams,
    cfg: &EpisodeConfig,
    rng: &mut Rng,
) -> Result<Episode> {
    let mut sim = learner.clone();
    let mut summaries: Vec<InteractionSummary> = vec![sim.initial_summary()];
    let mut history: Vec<String> = Vec::new();
    let mut steps = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let profile = profile_from_summaries(&summaries, &cfg.profiler)?;
        let cands = retrieve(&profile_query(&profile), corpus, &history, &cfg.retrieval)?;
        if cands.is_empty() {
            break;
        }
        let ids = cands.id_vec();
        let state = sim.state().clone();
        let features = featurize_candidates(&state, &profile, &ids, corpus)?;
        let log_probs = behaviour.map(|p| log_softmax(&p.logits(&features)));
        let chosen = match chooser {
            Chooser::Uniform => rng.random_range(0..ids.len()),
            Chooser::RetrievalTop => 0,
            Chooser::Sample(p) => sample_index(&softmax(&p.logits(&features)), rng),
            Chooser::Greedy(p) => {
                let id = plan_next(p, value, None, &state, &profile, &cands, cfg.gamma, corpus)?;
                ids.iter().position(|x| *x == id).expect("plan_next returns a candidate")
            }
            Chooser::Lookahead(v) => {
                let env = PlanningEnv { learner: &sim, weights: &cfg.weights };
                let id = plan_next(&PolicyParams::zeros(), v, Some(env), &state, &profile, &cands, cfg.gamma, corpus)?;
                ids.iter().position(|x| *x == id).expect("plan_next returns a candidate")
            }
        };
        let out = sim.step(corpus, &ids[chosen])?;
        let breakdown = compute_reward(&state, &out.state, &cfg.weights)?;
        if !breakdown.total.is_finite() {
            return Err(Error::NonFinite(format!("reward for {}", learner.learner_id)));
        }
        let sf = state_features(&state);
        let nsf = state_features(&out.state);
        steps.push(TrajectoryStep {
            value_s: value_of_features(value, &sf),
            value_s_next: value_of_features(value, &nsf),
            state,
            next_state: out.state,
            profile,
            log_prob_old: log_probs.map_or(0.0, |lp| lp[chosen]),
            candidates: ids,
            features,
            chosen,
            reward: breakdown.total,
            breakdown,
            state_features: sf,
            next_state_features: nsf,
        });
        history.push(steps.last().expect("just pushed").chosen_id().to_string());
        summaries.push(out.summary);
        sim = out.learner;
    }
    // The episode ends here, so nothing follows the last state.
    if let Some(last) = steps.last_mut() {
        last.value_s_next = 0.0;
    }
    Ok(Episode {
        learner_id: learner.learner_id.clone(),
        final_state: sim.state().clone(),
        steps,
    })
}
