//! A seeded simulated learner used as the state-transition function.
//!
//! Each component carries hidden progress in `[0, 1]`. A learning action
//! *matches* a component when its keywords intersect the component's targets
//! and its Bloom level is within one step of the component's target level.
//! A match adds `progress_increment_match`; anything else adds
//! `progress_increment_miss - regression_rate`. A component is ALIGNED exactly
//! when its progress reaches its threshold.
//!
//! Stepping is a pure function of the learner value and the action: all
//! randomness comes from `rng_seed` and the current timestep.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bloom::BloomLevel;
use crate::corpus::{KnowledgeCorpus, LearningAction};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::state::{
    new_state, ComponentStatus, Dimension, EvidenceItem, LearnerState, StateComponent,
};

/// Discourse tokens the simulated learner sprinkles into its messages.
pub const CHAT_TOKENS: [&str; 12] = [
    "hmm", "okay", "thanks", "why", "how", "please", "again", "confused", "interesting", "got",
    "it", "wait",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentAffinity {
    pub component_id: String,
    pub keyword_targets: BTreeSet<String>,
    pub bloom_target: BloomLevel,
    pub progress_increment_match: f64,
    pub progress_increment_miss: f64,
    pub regression_rate: f64,
    pub confidence_drift: f64,
}

impl ComponentAffinity {
    pub fn validate(&self) -> Result<()> {
        let ok = self.progress_increment_match > 0.0
            && self.progress_increment_match <= 1.0
            && (0.0..1.0).contains(&self.progress_increment_miss)
            && (0.0..1.0).contains(&self.regression_rate)
            && self.regression_rate < self.progress_increment_match
            && self.confidence_drift.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "affinity for `{}` has out-of-range increments",
                self.component_id
            )))
        }
    }

    pub fn matches(&self, action: &LearningAction) -> bool {
        action.bloom.distance(self.bloom_target) <= 1
            && action.keywords.iter().any(|k| self.keyword_targets.contains(k))
    }

    /// Raw (unclamped) progress change caused by `action`.
    pub fn progress_change(&self, action: &LearningAction) -> f64 {
        if self.matches(action) {
            self.progress_increment_match
        } else {
            self.progress_increment_miss - self.regression_rate
        }
    }
}

/// A component that only enters the state once the learner meets its trigger
/// keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentComponent {
    pub component: StateComponent,
    pub affinity: ComponentAffinity,
    pub trigger_keyword: String,
    pub initial_progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSummary {
    pub turns: u32,
    pub dwell_seconds: f64,
    pub revisits: u32,
    pub quiz_correct: u32,
    pub quiz_total: u32,
    pub message_tokens: Vec<String>,
}

impl InteractionSummary {
    pub fn validate(&self) -> Result<()> {
        if self.quiz_correct > self.quiz_total {
            return Err(Error::InvalidArgument(format!(
                "quiz_correct {} exceeds quiz_total {}",
                self.quiz_correct, self.quiz_total
            )));
        }
        if !(self.dwell_seconds >= 0.0) {
            return Err(Error::InvalidArgument("dwell_seconds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Distributions for generated interaction logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    /// Quiz accuracy for learners whose latent level is Understanding,
    /// Applying and Analyzing (or above), in that order.
    pub quiz_accuracy: [f64; 3],
    /// Accuracy bonus on a step that raised some component's progress.
    pub progress_accuracy_bonus: f64,
    pub quiz_items_per_step: u32,
    pub quiz_items_initial: u32,
    pub base_dwell_seconds: f64,
    pub dwell_per_progress: f64,
    /// Turns in the pre-planning session log, drawn uniformly.
    pub initial_turns: (u32, u32),
    /// Chance that an open (unaligned) goal keyword is mentioned per step.
    pub goal_mention_rate: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            quiz_accuracy: [0.2, 0.5, 0.85],
            progress_accuracy_bonus: 0.1,
            quiz_items_per_step: 3,
            quiz_items_initial: 10,
            base_dwell_seconds: 120.0,
            dwell_per_progress: 400.0,
            initial_turns: (30, 68),
            goal_mention_rate: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLearner {
    pub learner_id: String,
    state: LearnerState,
    hidden_progress: BTreeMap<String, f64>,
    affinities: BTreeMap<String, ComponentAffinity>,
    latent: Vec<LatentComponent>,
    cognitive_level: BloomLevel,
    rng_seed: u64,
    turn_counter: u64,
    summary: SummaryConfig,
}

pub struct StepOutcome {
    pub learner: SimLearner,
    pub summary: InteractionSummary,
    pub state: LearnerState,
}

impl SimLearner {
    /// Assembles a learner from an initial component set. Components are
    /// reset to NOT_ALIGNED and then re-evaluated against their initial
    /// progress only from the first step on.
    pub fn new(
        learner_id: impl Into<String>,
        components: Vec<(StateComponent, ComponentAffinity, f64)>,
        latent: Vec<LatentComponent>,
        cognitive_level: BloomLevel,
        rng_seed: u64,
        summary: SummaryConfig,
    ) -> Result<Self> {
        let mut comps = Vec::with_capacity(components.len());
        let mut hidden_progress = BTreeMap::new();
        let mut affinities = BTreeMap::new();
        for (c, aff, progress) in components {
            if aff.component_id != c.id {
                return Err(Error::InvalidArgument(format!(
                    "affinity `{}` does not belong to component `{}`",
                    aff.component_id, c.id
                )));
            }
            aff.validate()?;
            hidden_progress.insert(c.id.clone(), progress.clamp(0.0, 1.0));
            affinities.insert(c.id.clone(), aff);
            comps.push(c);
        }
        for l in &latent {
            l.affinity.validate()?;
        }
        Ok(Self {
            learner_id: learner_id.into(),
            state: new_state(comps)?,
            hidden_progress,
            affinities,
            latent,
            cognitive_level,
            rng_seed,
            turn_counter: 0,
            summary,
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn progress(&self, id: &str) -> Option<f64> {
        self.hidden_progress.get(id).copied()
    }

    pub fn hidden_progress(&self) -> &BTreeMap<String, f64> {
        &self.hidden_progress
    }

    pub fn affinities(&self) -> &BTreeMap<String, ComponentAffinity> {
        &self.affinities
    }

    pub fn latent(&self) -> &[LatentComponent] {
        &self.latent
    }

    pub fn cognitive_level(&self) -> BloomLevel {
        self.cognitive_level
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Same learner, different interaction-noise stream.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }

    fn accuracy(&self) -> f64 {
        let idx = match self.cognitive_level {
            BloomLevel::Remembering | BloomLevel::Understanding => 0,
            BloomLevel::Applying => 1,
            _ => 2,
        };
        self.summary.quiz_accuracy[idx]
    }

    fn open_goal_tokens(&self, state: &LearnerState) -> Vec<&str> {
        state
            .components()
            .iter()
            .filter(|c| !c.is_aligned())
            .filter_map(|c| self.affinities.get(&c.id))
            .flat_map(|a| a.keyword_targets.iter().map(String::as_str))
            .collect()
    }

    /// The interaction log preceding the first planning decision.
    pub fn initial_summary(&self) -> InteractionSummary {
        let mut rng = rng::rng_for(self.rng_seed, u64::MAX);
        let cfg = &self.summary;
        let turns = rng.random_range(cfg.initial_turns.0..=cfg.initial_turns.1.max(cfg.initial_turns.0));
        let quiz_total = cfg.quiz_items_initial;
        let quiz_correct = binomial(&mut rng, quiz_total, self.accuracy());
        let mut tokens = Vec::new();
        for t in self.open_goal_tokens(&self.state) {
            tokens.push(t.to_string());
            tokens.push(t.to_string());
        }
        push_chat(&mut rng, &mut tokens, 3);
        tokens.shuffle(&mut rng);
        InteractionSummary {
            turns,
            dwell_seconds: cfg.base_dwell_seconds + rng.random_range(0.0..240.0),
            revisits: rng.random_range(0..3),
            quiz_correct,
            quiz_total,
            message_tokens: tokens,
        }
    }

    /// Applies `action_id` and returns the successor learner, the generated
    /// interaction summary and the new state.
    pub fn step(&self, corpus: &KnowledgeCorpus, action_id: &str) -> Result<StepOutcome> {
        let action = corpus.require(action_id)?;
        let mut next = self.clone();
        let mut state = self.state.advance();
        let mut rng = rng::rng_for(self.rng_seed, state.timestep());
        let turns = 2 + rng.random_range(0..4u32);
        let turn = self.turn_counter + turns as u64;

        let mut gain = 0.0;
        for c in self.state.components() {
            let aff = &self.affinities[&c.id];
            let before = self.hidden_progress[&c.id];
            let after = (before + aff.progress_change(action)).clamp(0.0, 1.0);
            let change = after - before;
            gain += change.max(0.0);
            next.hidden_progress.insert(c.id.clone(), after);
            let comp = state.get_mut(&c.id).expect("advance keeps components");
            let status = if after >= comp.threshold {
                ComponentStatus::Aligned
            } else {
                ComponentStatus::NotAligned
            };
            if status == ComponentStatus::Aligned && !comp.is_aligned() {
                comp.evidence.push(EvidenceItem {
                    turn_index: turn,
                    quote: format!("After \"{}\" the learner met \"{}\".", action.title, comp.metric_name),
                });
            }
            comp.status = status;
            comp.confidence = (comp.confidence + aff.confidence_drift * change).clamp(0.0, 1.0);
        }

        // Latent components surface on their trigger keyword.
        let (activated, dormant): (Vec<_>, Vec<_>) = std::mem::take(&mut next.latent)
            .into_iter()
            .partition(|l| action.has_keyword(&l.trigger_keyword));
        next.latent = dormant;
        for l in activated {
            let mut comp = l.component;
            comp.status = if l.initial_progress >= comp.threshold {
                ComponentStatus::Aligned
            } else {
                ComponentStatus::NotAligned
            };
            comp.evidence.push(EvidenceItem {
                turn_index: turn,
                quote: format!("The learner brought up {}.", l.trigger_keyword),
            });
            next.hidden_progress.insert(comp.id.clone(), l.initial_progress);
            next.affinities.insert(comp.id.clone(), l.affinity);
            state.push(comp)?;
        }

        let cfg = &self.summary;
        let p = (self.accuracy() + if gain > 0.0 { cfg.progress_accuracy_bonus } else { 0.0 }).clamp(0.0, 1.0);
        let quiz_total = cfg.quiz_items_per_step;
        let quiz_correct = binomial(&mut rng, quiz_total, p);
        let mut tokens: Vec<String> = Vec::new();
        for t in next.open_goal_tokens(&state) {
            if rng.random::<f64>() < cfg.goal_mention_rate {
                tokens.push(t.to_string());
            }
        }
        push_chat(&mut rng, &mut tokens, 2);
        tokens.shuffle(&mut rng);
        let summary = InteractionSummary {
            turns,
            dwell_seconds: cfg.base_dwell_seconds
                + cfg.dwell_per_progress * gain.min(1.0)
                + rng.random_range(0.0..120.0),
            revisits: rng.random_range(0..3) + (self.cognitive_level <= BloomLevel::Understanding) as u32,
            quiz_correct,
            quiz_total,
            message_tokens: tokens,
        };

        next.turn_counter = turn;
        next.state = state.clone();
        Ok(StepOutcome {
            learner: next,
            summary,
            state,
        })
    }
}

fn binomial(rng: &mut Rng, n: u32, p: f64) -> u32 {
    (0..n).filter(|_| rng.random::<f64>() < p).count() as u32
}

fn push_chat(rng: &mut Rng, tokens: &mut Vec<String>, n: usize) {
    for _ in 0..n {
        tokens.push(CHAT_TOKENS.choose(rng).expect("non-empty").to_string());
    }
}

/// Parameters for synthetic learner populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimPopulationConfig {
    /// Expected components per learner for O_L, O_S, M_I, M_E.
    pub components_per_dimension: [f64; 4],
    pub targets_per_component: usize,
    pub initial_progress: (f64, f64),
    pub threshold: (f64, f64),
    pub confidence: (f64, f64),
    pub increment_match: (f64, f64),
    pub increment_miss: (f64, f64),
    pub regression: (f64, f64),
    pub confidence_drift: (f64, f64),
    pub latent_per_learner: usize,
    pub latent_initial_progress: (f64, f64),
    /// Relative frequency of latent cognitive levels Understanding,
    /// Applying, Analyzing.
    pub cognitive_mix: [f64; 3],
    /// Probability that a component's Bloom target is the learner's level
    /// rather than one step away.
    pub bloom_target_exact: f64,
    pub summary: SummaryConfig,
}

impl Default for SimPopulationConfig {
    fn default() -> Self {
        Self {
            // 326 / 401 / 338 / 350 components over 300 sessions.
            components_per_dimension: [326.0 / 300.0, 401.0 / 300.0, 338.0 / 300.0, 350.0 / 300.0],
            targets_per_component: 1,
            initial_progress: (0.45, 0.6),
            threshold: (0.6, 0.9),
            confidence: (0.5, 0.95),
            increment_match: (0.35, 0.45),
            increment_miss: (0.0, 0.03),
            regression: (0.0, 0.02),
            confidence_drift: (0.0, 0.3),
            latent_per_learner: 1,
            latent_initial_progress: (0.5, 1.0),
            cognitive_mix: [0.3, 0.4, 0.3],
            bloom_target_exact: 1.0,
            summary: SummaryConfig::default(),
        }
    }
}

impl SimPopulationConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, (lo, hi): (f64, f64)| -> Result<()> {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} range ({lo}, {hi}) invalid")));
            }
            Ok(())
        };
        unit("initial_progress", self.initial_progress)?;
        unit("threshold", self.threshold)?;
        unit("confidence", self.confidence)?;
        unit("increment_match", self.increment_match)?;
        unit("increment_miss", self.increment_miss)?;
        unit("regression", self.regression)?;
        unit("latent_initial_progress", self.latent_initial_progress)?;
        if self.increment_match.0 <= 0.0 || self.increment_miss.1 >= 1.0 || self.regression.1 >= 1.0 {
            return Err(Error::InvalidArgument("increments must satisfy match > 0, miss < 1, regression < 1".into()));
        }
        if self.regression.1 >= self.increment_match.0 {
            return Err(Error::InvalidArgument("regression must stay below the match increment".into()));
        }
        if self.components_per_dimension.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("components_per_dimension must be non-negative".into()));
        }
        if self.cognitive_mix.iter().any(|w| !(*w >= 0.0)) || self.cognitive_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("cognitive_mix needs a positive weight".into()));
        }
        if self.targets_per_component == 0 {
            return Err(Error::InvalidArgument("targets_per_component must be at least 1".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// `floor(mean)` plus one more with probability `frac(mean)`.
fn component_count(rng: &mut Rng, mean: f64) -> usize {
    let base = mean.floor();
    base as usize + (rng.random::<f64>() < mean - base) as usize
}

const DESCRIPTION_TEMPLATES: [&str; 4] = [
    "Build lasting mastery of {a} and {b}",
    "Work through {a} and {b} in this session",
    "Curious how {a} connects to {b}",
    "Wants to use {a} and {b} in a project",
];

const METRIC_NAMES: [&str; 4] = [
    "mastery_score",
    "task_completion",
    "question_frequency",
    "stated_goal_progress",
];

fn describe(dim: Dimension, targets: &BTreeSet<String>) -> String {
    let mut it = targets.iter();
    let a = it.next().map_or("", String::as_str);
    let b = it.next().map_or(a, String::as_str);
    DESCRIPTION_TEMPLATES[dim.index()].replace("{a}", a).replace("{b}", b)
}

struct ComponentDraw {
    component: StateComponent,
    affinity: ComponentAffinity,
    progress: f64,
}

fn draw_component(
    rng: &mut Rng,
    config: &SimPopulationConfig,
    corpus: &KnowledgeCorpus,
    id: String,
    dim: Dimension,
    level: BloomLevel,
    anchors: &[&LearningAction],
    progress_range: (f64, f64),
) -> ComponentDraw {
    let anchor = anchors.choose(rng).copied().or_else(|| corpus.actions().next());
    let targets: BTreeSet<String> = anchor
        .map(|a| {
            a.keywords
                .choose_multiple(rng, config.targets_per_component)
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    let bloom_target = if rng.random::<f64>() < config.bloom_target_exact {
        level
    } else {
        let offset = if rng.random::<bool>() { 1 } else { -1 };
        BloomLevel::saturating_from(level.ordinal() as i64 + offset)
    };
    let increment_match = uniform(rng, config.increment_match).max(1e-6);
    let regression = uniform(rng, config.regression).min(increment_match * 0.5);
    let affinity = ComponentAffinity {
        component_id: id.clone(),
        keyword_targets: targets.clone(),
        bloom_target,
        progress_increment_match: increment_match,
        progress_increment_miss: uniform(rng, config.increment_miss),
        regression_rate: regression,
        confidence_drift: uniform(rng, config.confidence_drift),
    };
    let first = targets.iter().next().cloned().unwrap_or_default();
    let component = StateComponent {
        id,
        dimension: dim,
        description: describe(dim, &targets),
        metric_name: METRIC_NAMES[dim.index()].to_string(),
        threshold: uniform(rng, config.threshold),
        evidence: vec![EvidenceItem {
            turn_index: rng.random_range(1..30),
            quote: format!("I would like to get better at {first}."),
        }],
        confidence: uniform(rng, config.confidence),
        status: ComponentStatus::NotAligned,
    };
    ComponentDraw {
        component,
        affinity,
        progress: uniform(rng, progress_range),
    }
}

/// Spawns `n` learners whose goals are anchored on actions of `corpus`.
pub fn spawn_population(
    config: &SimPopulationConfig,
    corpus: &KnowledgeCorpus,
    n: usize,
    seed: u64,
) -> Result<Vec<SimLearner>> {
    if n < 1 {
        return Err(Error::InvalidArgument("population size must be at least 1".into()));
    }
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("population needs a non-empty corpus".into()));
    }
    let levels = [BloomLevel::Understanding, BloomLevel::Applying, BloomLevel::Analyzing];
    (0..n)
        .map(|i| {
            let mut rng = rng::rng_for(seed, i as u64);
            let level = {
                let total: f64 = config.cognitive_mix.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = levels[levels.len() - 1];
                for (l, w) in levels.iter().zip(config.cognitive_mix) {
                    if u < w {
                        pick = *l;
                        break;
                    }
                    u -= w;
                }
                pick
            };
            let anchors: Vec<&LearningAction> = corpus
                .actions()
                .filter(|a| a.bloom.distance(level) <= 1)
                .collect();
            let mut components = Vec::new();
            for dim in Dimension::ALL {
                let count = component_count(&mut rng, config.components_per_dimension[dim.index()]);
                for j in 0..count {
                    let id = format!("{}-{}", dim.code().replace('_', ""), j + 1);
                    let d = draw_component(&mut rng, config, corpus, id, dim, level, &anchors, config.initial_progress);
                    components.push((d.component, d.affinity, d.progress));
                }
            }
            let mut latent = Vec::new();
            for j in 0..config.latent_per_learner {
                let dim = Dimension::ALL[rng.random_range(0..4)];
                let id = format!("NEW-{}", j + 1);
                let d = draw_component(&mut rng, config, corpus, id, dim, level, &anchors, config.latent_initial_progress);
                let trigger = d.affinity.keyword_targets.iter().next().cloned().unwrap_or_default();
                latent.push(LatentComponent {
                    component: d.component,
                    affinity: d.affinity,
                    trigger_keyword: trigger,
                    initial_progress: d.progress,
                });
            }
            SimLearner::new(
                format!("learner-{i:04}"),
                components,
                latent,
                level,
                rng::derive(seed, 1_000_000 + i as u64),
                config.summary.clone(),
            )
        })
        .collect()
}

/// Component counts per dimension at timestep 0, summed over `learners`.
pub fn component_totals(learners: &[SimLearner]) -> [usize; 4] {
    let mut totals = [0; 4];
    for l in learners {
        for c in l.state().components() {
            totals[c.dimension.index()] += 1;
        }
    }
    totals
}
