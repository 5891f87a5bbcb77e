//! Expert-labelled (state, best action) datasets produced by a lookahead
//! oracle over the simulator.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::KnowledgeCorpus;
use crate::error::{Error, Result};
use crate::policy::argmax_by_id;
use crate::profiler::{profile_from_summaries, profile_query, LearnerProfile, ProfilerConfig};
use crate::retrieval::{retrieve, CandidateSet, RetrievalConfig};
use crate::reward::{compute_reward, RewardWeights};
use crate::rng;
use crate::sim::{SimLearner, SimPopulationConfig};
use crate::state::{Dimension, LearnerState};
use crate::text::TokenBag;

pub const GRADE_BEST: u8 = 2;
pub const GRADE_ACCEPTABLE: u8 = 1;
pub const GRADE_NOT_SUITABLE: u8 = 0;

/// Candidates whose lookahead return reaches this fraction of the best one
/// are graded acceptable.
pub const ACCEPTABLE_BAND: f64 = 0.75;

const SPLIT_STREAM: u64 = 0x5_9117;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRecord {
    pub learner_id: String,
    pub split: Split,
    pub state: LearnerState,
    pub profile: LearnerProfile,
    pub profile_query: TokenBag,
    pub candidates: Vec<String>,
    pub best: String,
    pub grades: BTreeMap<String, u8>,
    /// Lookahead return of each candidate.
    pub returns: BTreeMap<String, f64>,
}

impl ExpertRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.candidates.contains(&self.best) {
            return Err(Error::ExpertNotInCandidates(self.best.clone()));
        }
        let top: Vec<&String> = self.grades.iter().filter(|(_, g)| **g == GRADE_BEST).map(|(id, _)| id).collect();
        if top != [&self.best] {
            return Err(Error::InvalidRanking(format!(
                "record for `{}` must grade exactly its best action 2",
                self.learner_id
            )));
        }
        if self.candidates.iter().any(|c| !self.grades.contains_key(c)) {
            return Err(Error::InvalidRanking(format!("record for `{}` has ungraded candidates", self.learner_id)));
        }
        Ok(())
    }

    pub fn grade(&self, id: &str) -> u8 {
        self.grades.get(id).copied().unwrap_or(GRADE_NOT_SUITABLE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub lookahead: usize,
    pub gamma: f64,
    pub retrieval: RetrievalConfig,
    pub weights: RewardWeights,
    pub profiler: ProfilerConfig,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            lookahead: 1,
            gamma: 0.9,
            retrieval: RetrievalConfig::default(),
            weights: RewardWeights::default(),
            profiler: ProfilerConfig::default(),
        }
    }
}

/// Best discounted return reachable from `learner` in `depth` steps using
/// distinct actions from `pool` not yet in `taken`.
fn best_continuation(
    learner: &SimLearner,
    corpus: &KnowledgeCorpus,
    pool: &[String],
    taken: &mut Vec<String>,
    depth: usize,
    cfg: &ExpertConfig,
) -> Result<f64> {
    if depth == 0 {
        return Ok(0.0);
    }
    let mut best: Option<f64> = None;
    for id in pool {
        if taken.contains(id) {
            continue;
        }
        let v = action_return(learner, corpus, pool, taken, id, depth, cfg)?;
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    Ok(best.unwrap_or(0.0))
}

fn action_return(
    learner: &SimLearner,
    corpus: &KnowledgeCorpus,
    pool: &[String],
    taken: &mut Vec<String>,
    id: &str,
    depth: usize,
    cfg: &ExpertConfig,
) -> Result<f64> {
    let out = learner.step(corpus, id)?;
    let r = compute_reward(learner.state(), &out.state, &cfg.weights)?.total;
    taken.push(id.to_string());
    let rest = best_continuation(&out.learner, corpus, pool, taken, depth - 1, cfg);
    taken.pop();
    Ok(r + cfg.gamma * rest?)
}

/// Lookahead return of every candidate: its own reward plus the discounted
/// best continuation over the remaining candidates.
pub fn lookahead_returns(
    learner: &SimLearner,
    corpus: &KnowledgeCorpus,
    candidates: &[String],
    cfg: &ExpertConfig,
) -> Result<Vec<f64>> {
    if cfg.lookahead == 0 {
        return Err(Error::InvalidArgument("lookahead must be at least 1".into()));
    }
    let mut taken = Vec::with_capacity(cfg.lookahead);
    candidates
        .iter()
        .map(|id| action_return(learner, corpus, candidates, &mut taken, id, cfg.lookahead, cfg))
        .collect()
}

pub fn grade_candidates(candidates: &[String], returns: &[f64]) -> Option<(usize, BTreeMap<String, u8>)> {
    let best = argmax_by_id(returns, candidates)?;
    let top = returns[best];
    let grades = candidates
        .iter()
        .zip(returns)
        .enumerate()
        .map(|(i, (id, r))| {
            let g = if i == best {
                GRADE_BEST
            } else if top > 0.0 && *r >= ACCEPTABLE_BAND * top {
                GRADE_ACCEPTABLE
            } else {
                GRADE_NOT_SUITABLE
            };
            (id.clone(), g)
        })
        .collect();
    Some((best, grades))
}

/// Profile and candidate set a learner presents before its first decision.
pub fn initial_view(
    learner: &SimLearner,
    corpus: &KnowledgeCorpus,
    profiler: &ProfilerConfig,
    retrieval: &RetrievalConfig,
) -> Result<(LearnerProfile, TokenBag, CandidateSet)> {
    let profile = profile_from_summaries(&[learner.initial_summary()], profiler)?;
    let query = profile_query(&profile);
    let mut cands = retrieve(&query, corpus, &[], retrieval)?;
    cands.owner = Some(learner.learner_id.clone());
    Ok((profile, query, cands))
}

/// Test-set size: one in six, at least one.
pub fn test_size(n: usize) -> usize {
    n.div_ceil(6).max(1).min(n)
}

/// Train/test assignment by seeded shuffle of learner positions.
pub fn split_assignment(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_for(seed, SPLIT_STREAM));
    let mut out = vec![Split::Train; n];
    for &i in order.iter().take(test_size(n)) {
        out[i] = Split::Test;
    }
    out
}

/// One record per learner with a non-empty candidate set.
pub fn generate_expert_dataset(
    population: &[SimLearner],
    corpus: &KnowledgeCorpus,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<Vec<ExpertRecord>> {
    if cfg.lookahead == 0 {
        return Err(Error::InvalidArgument("lookahead must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("expert labelling needs a non-empty corpus".into()));
    }
    let splits = split_assignment(population.len(), seed);
    let records: Vec<Option<ExpertRecord>> = population
        .par_iter()
        .zip(splits.par_iter())
        .map(|(learner, split)| {
            let (profile, query, cands) = initial_view(learner, corpus, &cfg.profiler, &cfg.retrieval)?;
            if cands.is_empty() {
                warn!("no candidates for {}, record skipped", learner.learner_id);
                return Ok(None);
            }
            let ids = cands.id_vec();
            let returns = lookahead_returns(learner, corpus, &ids, cfg)?;
            let (best, grades) = grade_candidates(&ids, &returns).ok_or(Error::EmptyCandidates)?;
            Ok(Some(ExpertRecord {
                learner_id: learner.learner_id.clone(),
                split: *split,
                state: learner.state().clone(),
                profile,
                profile_query: query,
                best: ids[best].clone(),
                returns: ids.iter().cloned().zip(returns).collect(),
                candidates: ids,
                grades,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(records.into_iter().flatten().collect())
}

/// Session and component counts per split and dimension.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub sessions: usize,
    #[serde(rename = "O_L")]
    pub long_term: usize,
    #[serde(rename = "O_S")]
    pub short_term: usize,
    #[serde(rename = "M_I")]
    pub implicit: usize,
    #[serde(rename = "M_E")]
    pub explicit: usize,
}

impl SplitStats {
    fn add_state(&mut self, state: &LearnerState) {
        self.sessions += 1;
        for c in state.components() {
            *self.slot(c.dimension) += 1;
        }
    }

    fn slot(&mut self, dim: Dimension) -> &mut usize {
        match dim {
            Dimension::LongTermObjective => &mut self.long_term,
            Dimension::ShortTermObjective => &mut self.short_term,
            Dimension::ImplicitMotivation => &mut self.implicit,
            Dimension::ExplicitMotivation => &mut self.explicit,
        }
    }

    pub fn components(&self) -> [usize; 4] {
        [self.long_term, self.short_term, self.implicit, self.explicit]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub train: SplitStats,
    pub test: SplitStats,
    pub total: SplitStats,
}

impl DatasetStats {
    pub fn from_records(records: &[ExpertRecord]) -> Self {
        let mut s = DatasetStats::default();
        for r in records {
            match r.split {
                Split::Train => s.train.add_state(&r.state),
                Split::Test => s.test.add_state(&r.state),
            }
            s.total.add_state(&r.state);
        }
        s
    }

    /// Plain-text table: one row per split, columns Sessions and the four
    /// dimensions.
    pub fn table(&self) -> String {
        let mut out = format!("{:<6} {:>8} {:>5} {:>5} {:>5} {:>5}\n", "", "Sessions", "O_L", "O_S", "M_I", "M_E");
        for (name, s) in [("Train", &self.train), ("Test", &self.test), ("Total", &self.total)] {
            let [a, b, c, d] = s.components();
            out.push_str(&format!("{name:<6} {:>8} {a:>5} {b:>5} {c:>5} {d:>5}\n", s.sessions));
        }
        out
    }
}

/// On-disk dataset: records plus everything needed to regenerate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertDataset {
    pub seed: u64,
    pub n_sessions: usize,
    pub expert: ExpertConfig,
    pub population: SimPopulationConfig,
    pub stats: DatasetStats,
    pub records: Vec<ExpertRecord>,
}

impl ExpertDataset {
    pub fn build(
        corpus: &KnowledgeCorpus,
        population: &SimPopulationConfig,
        expert: &ExpertConfig,
        n_sessions: usize,
        seed: u64,
    ) -> Result<(Self, Vec<SimLearner>)> {
        let learners = crate::sim::spawn_population(population, corpus, n_sessions, seed)?;
        let records = generate_expert_dataset(&learners, corpus, expert, seed)?;
        let ds = Self {
            seed,
            n_sessions,
            expert: expert.clone(),
            population: population.clone(),
            stats: DatasetStats::from_records(&records),
            records,
        };
        Ok((ds, learners))
    }

    /// Respawns the population the dataset was built from.
    pub fn learners(&self, corpus: &KnowledgeCorpus) -> Result<Vec<SimLearner>> {
        crate::sim::spawn_population(&self.population, corpus, self.n_sessions, self.seed)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ExpertRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn learner_ids(&self, split: Split) -> BTreeSet<&str> {
        self.split(split).map(|r| r.learner_id.as_str()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: ExpertDataset = serde_json::from_str(s)?;
        for r in &ds.records {
            r.validate()?;
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::BloomLevel;
    use crate::corpus::LearningAction;
    use crate::sim::{ComponentAffinity, SummaryConfig};
    use crate::state::{ComponentStatus, StateComponent};

    fn action(id: &str, kw: &[&str]) -> LearningAction {
        LearningAction::new(id, id, "", kw.iter().copied(), BloomLevel::Applying, vec![]).unwrap()
    }

    fn comp(id: &str, threshold: f64) -> StateComponent {
        StateComponent {
            id: id.into(),
            dimension: Dimension::ShortTermObjective,
            description: id.into(),
            metric_name: "m".into(),
            threshold,
            evidence: vec![],
            confidence: 0.8,
            status: ComponentStatus::NotAligned,
        }
    }

    fn aff(id: &str, kw: &[&str], inc: f64) -> ComponentAffinity {
        ComponentAffinity {
            component_id: id.into(),
            keyword_targets: kw.iter().map(|s| s.to_string()).collect(),
            bloom_target: BloomLevel::Applying,
            progress_increment_match: inc,
            progress_increment_miss: 0.0,
            regression_rate: 0.0,
            confidence_drift: 0.0,
        }
    }

    fn learner(parts: Vec<(StateComponent, ComponentAffinity, f64)>) -> SimLearner {
        SimLearner::new("l", parts, vec![], BloomLevel::Applying, 3, SummaryConfig::default()).unwrap()
    }

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lookahead_one_is_single_step_argmax() {
        let corpus = KnowledgeCorpus::new(vec![action("a", &["x"]), action("b", &["y"]), action("c", &["z"])]).unwrap();
        let l = learner(vec![
            (comp("c1", 0.5), aff("c1", &["y"], 0.6), 0.0),
            (comp("c2", 0.5), aff("c2", &["z"], 0.3), 0.0),
        ]);
        let cfg = ExpertConfig { lookahead: 1, ..Default::default() };
        let cands = ids(&["a", "b", "c"]);
        let r = lookahead_returns(&l, &corpus, &cands, &cfg).unwrap();
        let single: Vec<f64> = cands
            .iter()
            .map(|id| compute_reward(l.state(), &l.step(&corpus, id).unwrap().state, &cfg.weights).unwrap().total)
            .collect();
        assert_eq!(r, single);
        let (best, grades) = grade_candidates(&cands, &r).unwrap();
        assert_eq!(cands[best], "b");
        assert_eq!(grades.values().filter(|g| **g == 2).count(), 1);
    }

    #[test]
    fn lookahead_two_matches_sequence_enumeration() {
        let corpus = KnowledgeCorpus::new(vec![action("a", &["x", "y"]), action("b", &["y"]), action("c", &["z"])]).unwrap();
        let l = learner(vec![
            (comp("c1", 0.5), aff("c1", &["x"], 0.3), 0.3),
            (comp("c2", 0.9), aff("c2", &["y"], 0.5), 0.0),
            (comp("c3", 0.4), aff("c3", &["z"], 0.5), 0.0),
        ]);
        let cfg = ExpertConfig { lookahead: 2, gamma: 0.9, ..Default::default() };
        let cands = ids(&["a", "b", "c"]);
        let got = lookahead_returns(&l, &corpus, &cands, &cfg).unwrap();

        // Brute force: every ordered pair of distinct actions.
        for (i, first) in cands.iter().enumerate() {
            let o1 = l.step(&corpus, first).unwrap();
            let r1 = compute_reward(l.state(), &o1.state, &cfg.weights).unwrap().total;
            let mut best = f64::NEG_INFINITY;
            for second in cands.iter().filter(|s| *s != first) {
                let o2 = o1.learner.step(&corpus, second).unwrap();
                let r2 = compute_reward(&o1.state, &o2.state, &cfg.weights).unwrap().total;
                best = best.max(r1 + 0.9 * r2);
            }
            assert!((got[i] - best).abs() < 1e-12, "{first}: {} vs {best}", got[i]);
        }
    }

    #[test]
    fn single_matching_action_is_best() {
        let corpus = KnowledgeCorpus::new(vec![action("a", &["q"]), action("b", &["y"]), action("c", &["w"])]).unwrap();
        let l = learner(vec![(comp("c1", 0.5), aff("c1", &["y"], 0.6), 0.0)]);
        let cands = ids(&["a", "b", "c"]);
        let r = lookahead_returns(&l, &corpus, &cands, &ExpertConfig { lookahead: 1, ..Default::default() }).unwrap();
        let (best, grades) = grade_candidates(&cands, &r).unwrap();
        assert_eq!(cands[best], "b");
        assert_eq!(grades["a"], 0);
        assert_eq!(grades["c"], 0);
    }

    #[test]
    fn grading_band() {
        let cands = ids(&["a", "b", "c", "d"]);
        let (best, g) = grade_candidates(&cands, &[1.0, 0.8, 0.74, 1.0]).unwrap();
        assert_eq!(best, 0);
        assert_eq!(g["a"], 2);
        assert_eq!(g["b"], 1);
        assert_eq!(g["c"], 0);
        assert_eq!(g["d"], 1);
        assert!(grade_candidates(&[], &[]).is_none());
    }

    #[test]
    fn split_ratio() {
        for (n, test) in [(300, 50), (10, 2), (1, 1), (6, 1), (7, 2)] {
            let s = split_assignment(n, 9);
            assert_eq!(s.iter().filter(|x| **x == Split::Test).count(), test, "n = {n}");
        }
        assert_eq!(split_assignment(50, 1), split_assignment(50, 1));
    }
}
