//! Linear-softmax policy over candidate actions, linear value baseline and
//! the planning rule.
//!
//! Feature layout (version 1):
//!
//! | index  | feature                                                      |
//! |--------|--------------------------------------------------------------|
//! | 0..4   | unaligned component count per dimension (O_L, O_S, M_I, M_E) |
//! | 4..8   | mean confidence of unaligned components per dimension        |
//! | 8      | share of action keywords found in open goals or interests    |
//! | 9      | Bloom distance between action and profile cognition          |
//! | 10..14 | persona one-hot                                              |
//! | 14     | engagement                                                   |
//! | 15     | bias                                                         |
//!
//! The first eight entries depend on the state only and feed the value
//! baseline.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeCorpus, LearningAction};
use crate::error::{Error, Result};
use crate::profiler::LearnerProfile;
use crate::retrieval::CandidateSet;
use crate::reward::{compute_reward, RewardWeights};
use crate::rng::{self, Rng};
use crate::sim::SimLearner;
use crate::state::LearnerState;
use crate::text::tokenize;

use rand::Rng as _;

pub const FEATURE_DIM: usize = 16;
pub const STATE_FEATURE_DIM: usize = 8;
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

pub const FEATURE_LAYOUT: [&str; FEATURE_DIM] = [
    "unaligned_count_O_L",
    "unaligned_count_O_S",
    "unaligned_count_M_I",
    "unaligned_count_M_E",
    "unaligned_confidence_O_L",
    "unaligned_confidence_O_S",
    "unaligned_confidence_M_I",
    "unaligned_confidence_M_E",
    "keyword_coverage",
    "bloom_distance",
    "persona_momentum",
    "persona_consolidator",
    "persona_explorer",
    "persona_struggler",
    "engagement",
    "bias",
];

pub const COVERAGE: usize = 8;
pub const BLOOM_DISTANCE: usize = 9;
pub const PERSONA: usize = 10;
pub const ENGAGEMENT: usize = 14;
pub const BIAS: usize = 15;

/// FNV-1a (64-bit) over the feature names, hex encoded.
pub fn feature_layout_hash() -> String {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for name in FEATURE_LAYOUT {
        for b in name.bytes().chain(std::iter::once(b'|')) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn dot(&self, w: &[f64; FEATURE_DIM]) -> f64 {
        self.0.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    pub fn state_part(&self) -> [f64; STATE_FEATURE_DIM] {
        let mut out = [0.0; STATE_FEATURE_DIM];
        out.copy_from_slice(&self.0[..STATE_FEATURE_DIM]);
        out
    }
}

/// State-only features: unaligned counts and mean unaligned confidence per
/// dimension.
pub fn state_features(state: &LearnerState) -> [f64; STATE_FEATURE_DIM] {
    let mut out = [0.0; STATE_FEATURE_DIM];
    for c in state.components().iter().filter(|c| !c.is_aligned()) {
        let d = c.dimension.index();
        out[d] += 1.0;
        out[4 + d] += c.confidence;
    }
    for d in 0..4 {
        if out[d] > 0.0 {
            out[4 + d] /= out[d];
        }
    }
    out
}

/// Tokens describing what the learner still wants: descriptions of unaligned
/// components plus profile interests.
pub fn open_goal_tokens(state: &LearnerState, profile: &LearnerProfile) -> BTreeSet<String> {
    state
        .components()
        .iter()
        .filter(|c| !c.is_aligned())
        .flat_map(|c| tokenize(&c.description))
        .chain(profile.interest.tokens().map(str::to_string))
        .collect()
}

/// Fraction of the action's keywords that appear in `goals`.
pub fn keyword_coverage(action: &LearningAction, goals: &BTreeSet<String>) -> f64 {
    let hits = action.keywords.iter().filter(|k| goals.contains(*k)).count();
    if action.keywords.is_empty() { 0.0 } else { hits as f64 / action.keywords.len() as f64 }
}

fn featurize_with(
    state_part: &[f64; STATE_FEATURE_DIM],
    goals: &BTreeSet<String>,
    profile: &LearnerProfile,
    action: &LearningAction,
) -> FeatureVector {
    let mut f = [0.0; FEATURE_DIM];
    f[..STATE_FEATURE_DIM].copy_from_slice(state_part);
    f[COVERAGE] = keyword_coverage(action, goals);
    f[BLOOM_DISTANCE] = action.bloom.distance(profile.cognition) as f64;
    f[PERSONA + profile.persona.index()] = 1.0;
    f[ENGAGEMENT] = profile.engagement;
    f[BIAS] = 1.0;
    FeatureVector(f)
}

pub fn featurize(state: &LearnerState, profile: &LearnerProfile, action: &LearningAction) -> FeatureVector {
    featurize_with(&state_features(state), &open_goal_tokens(state, profile), profile, action)
}

/// Features for every candidate, in candidate order.
pub fn featurize_candidates(
    state: &LearnerState,
    profile: &LearnerProfile,
    candidates: &[String],
    corpus: &KnowledgeCorpus,
) -> Result<Vec<FeatureVector>> {
    let sf = state_features(state);
    let goals = open_goal_tokens(state, profile);
    candidates
        .iter()
        .map(|id| Ok(featurize_with(&sf, &goals, profile, corpus.require(id)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: [f64; FEATURE_DIM],
    pub temperature: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::zeros()
    }
}

impl PolicyParams {
    pub const DEFAULT_TEMPERATURE: f64 = 0.5;

    pub fn zeros() -> Self {
        Self {
            theta: [0.0; FEATURE_DIM],
            temperature: Self::DEFAULT_TEMPERATURE,
        }
    }

    pub fn new(theta: [f64; FEATURE_DIM], temperature: f64) -> Result<Self> {
        let p = Self { theta, temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        Ok(())
    }

    pub fn logit(&self, f: &FeatureVector) -> f64 {
        f.dot(&self.theta) / self.temperature
    }

    pub fn logits(&self, features: &[FeatureVector]) -> Vec<f64> {
        features.iter().map(|f| self.logit(f)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub v_weights: [f64; STATE_FEATURE_DIM],
    #[serde(default)]
    pub intercept: f64,
}

pub fn state_value(params: &ValueParams, state: &LearnerState) -> f64 {
    value_of_features(params, &state_features(state))
}

pub fn value_of_features(params: &ValueParams, sf: &[f64; STATE_FEATURE_DIM]) -> f64 {
    params.intercept + sf.iter().zip(&params.v_weights).map(|(a, b)| a * b).sum::<f64>()
}

/// `ln sum exp(x)` with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|x| x - lse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub support: Vec<String>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn from_logits(support: Vec<String>, logits: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("policy logits".into()));
        }
        Ok(Self {
            support,
            probs: softmax(logits),
            log_probs: log_softmax(logits),
        })
    }

    pub fn prob(&self, id: &str) -> Option<f64> {
        self.support.iter().position(|s| s == id).map(|i| self.probs[i])
    }
}

pub fn action_distribution(
    params: &PolicyParams,
    state: &LearnerState,
    profile: &LearnerProfile,
    candidates: &CandidateSet,
    corpus: &KnowledgeCorpus,
) -> Result<ActionDistribution> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let ids = candidates.id_vec();
    let feats = featurize_candidates(state, profile, &ids, corpus)?;
    ActionDistribution::from_logits(ids, &params.logits(&feats))
}

/// Inverse-CDF draw over `probs` in support order.
pub fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Samples an action; returns its id and log-probability.
pub fn sample_action(dist: &ActionDistribution, rng: &mut Rng) -> (String, f64) {
    let i = sample_index(&dist.probs, rng);
    (dist.support[i].clone(), dist.log_probs[i])
}

pub fn sample_action_seeded(dist: &ActionDistribution, seed: u64) -> (String, f64) {
    sample_action(dist, &mut rng::rng_from(seed))
}

/// Index of the maximum, ties broken by the smaller id.
pub fn argmax_by_id(values: &[f64], ids: &[String]) -> Option<usize> {
    (0..values.len()).reduce(|best, i| {
        match values[i].total_cmp(&values[best]) {
            std::cmp::Ordering::Greater => i,
            std::cmp::Ordering::Equal if ids[i] < ids[best] => i,
            _ => best,
        }
    })
}

/// Simulator handle for evaluation-mode planning.
pub struct PlanningEnv<'a> {
    pub learner: &'a SimLearner,
    pub weights: &'a RewardWeights,
}

/// Picks the next action.
///
/// With an environment, each candidate is scored by one simulated step as
/// `R + gamma * V(s')` (the simulator is deterministic, so this is the
/// expectation). Without one, the candidate with the highest policy logit is
/// chosen. Ties go to the smaller id in both modes.
#[allow(clippy::too_many_arguments)]
pub fn plan_next(
    policy: &PolicyParams,
    value: &ValueParams,
    env: Option<PlanningEnv<'_>>,
    state: &LearnerState,
    profile: &LearnerProfile,
    candidates: &CandidateSet,
    gamma: f64,
    corpus: &KnowledgeCorpus,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let ids = candidates.id_vec();
    let scores = match env {
        Some(env) => ids
            .iter()
            .map(|id| {
                let out = env.learner.step(corpus, id)?;
                let r = compute_reward(env.learner.state(), &out.state, env.weights)?.total;
                Ok(r + gamma * state_value(value, &out.state))
            })
            .collect::<Result<Vec<f64>>>()?,
        None => policy.logits(&featurize_candidates(state, profile, &ids, corpus)?),
    };
    let best = argmax_by_id(&scores, &ids).ok_or(Error::EmptyCandidates)?;
    Ok(ids[best].clone())
}

/// Persisted policy + value checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub feature_layout_hash: String,
    pub theta: [f64; FEATURE_DIM],
    pub temperature: f64,
    pub v_weights: [f64; STATE_FEATURE_DIM],
    #[serde(default)]
    pub v_intercept: f64,
}

impl Checkpoint {
    pub fn new(policy: &PolicyParams, value: &ValueParams) -> Self {
        Self {
            version: FEATURE_LAYOUT_VERSION,
            feature_layout_hash: feature_layout_hash(),
            theta: policy.theta,
            temperature: policy.temperature,
            v_weights: value.v_weights,
            v_intercept: value.intercept,
        }
    }

    pub fn policy(&self) -> Result<PolicyParams> {
        PolicyParams::new(self.theta, self.temperature)
    }

    pub fn value(&self) -> ValueParams {
        ValueParams {
            v_weights: self.v_weights,
            intercept: self.v_intercept,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.feature_layout_hash != feature_layout_hash() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint feature layout {} does not match {}",
                ck.feature_layout_hash,
                feature_layout_hash()
            )));
        }
        ck.policy()?;
        Ok(ck)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
