//! Paired-seed comparison of planners and expert-ranking evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::KnowledgeCorpus;
use crate::error::{Error, Result};
use crate::expert::ExpertRecord;
use crate::metrics::{alignment_report, AlignmentReport, RankingCase};
use crate::policy::{featurize_candidates, PolicyParams, ValueParams};
use crate::rng;
use crate::rollout::{run_episode, Chooser, Episode, EpisodeConfig};
use crate::sim::SimLearner;

/// How a learned policy acts during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Planner {
    Uniform,
    RetrievalOnly,
    Learned {
        params: PolicyParams,
        value: ValueParams,
        mode: ActMode,
    },
}

impl Planner {
    fn chooser(&self) -> Chooser<'_> {
        match self {
            Planner::Uniform => Chooser::Uniform,
            Planner::RetrievalOnly => Chooser::RetrievalTop,
            Planner::Learned { params, mode: ActMode::Sample, .. } => Chooser::Sample(params),
            Planner::Learned { params, mode: ActMode::Greedy, .. } => Chooser::Greedy(params),
        }
    }

    fn value(&self) -> ValueParams {
        match self {
            Planner::Learned { value, .. } => value.clone(),
            _ => ValueParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedPlanner {
    pub name: String,
    pub planner: Planner,
}

impl NamedPlanner {
    pub fn new(name: impl Into<String>, planner: Planner) -> Self {
        Self { name: name.into(), planner }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub mean_return: f64,
    /// Population standard deviation of the per-seed mean returns.
    pub std_return: f64,
    /// Percent of components aligned at episode end, over all seeds.
    pub final_alignment: f64,
    pub per_seed_return: Vec<f64>,
    pub report: AlignmentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub gamma: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.policy == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,mean_return,std_return,final_alignment\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.4}\n",
                r.policy, r.mean_return, r.std_return, r.final_alignment
            ));
        }
        out
    }
}

/// Episodes of one planner on every learner for one evaluation seed. The
/// learner's interaction noise and the planner's own randomness both derive
/// from (seed, learner position), so planners see paired environments.
pub fn evaluate_seed(
    planner: &Planner,
    learners: &[SimLearner],
    corpus: &KnowledgeCorpus,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<Vec<Episode>> {
    let value = planner.value();
    let chooser = planner.chooser();
    learners
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let env = l.reseeded(rng::derive(seed, 2 * i as u64));
            let mut rng = rng::rng_for(seed, 2 * i as u64 + 1);
            run_episode(&env, corpus, chooser, None, &value, cfg, &mut rng)
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn compare_policies(
    planners: &[NamedPlanner],
    learners: &[SimLearner],
    corpus: &KnowledgeCorpus,
    cfg: &EpisodeConfig,
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if planners.len() < 2 {
        return Err(Error::InvalidArgument("comparison needs at least two policies".into()));
    }
    if seeds.is_empty() || learners.is_empty() {
        return Err(Error::InvalidArgument("comparison needs seeds and learners".into()));
    }
    let rows = planners
        .iter()
        .map(|np| {
            let mut per_seed = Vec::with_capacity(seeds.len());
            let mut finals = Vec::new();
            let mut episodes = Vec::new();
            for &seed in seeds {
                let eps = evaluate_seed(&np.planner, learners, corpus, cfg, seed)?;
                let total: f64 = eps.iter().map(|e| e.discounted_return(cfg.gamma)).sum();
                per_seed.push(total / eps.len() as f64);
                finals.extend(eps.iter().map(|e| e.final_state.clone()));
                episodes.extend(eps);
            }
            let report = alignment_report(&finals, episodes.iter().flat_map(|e| e.steps.iter().map(|s| &s.breakdown)));
            let (mean_return, std_return) = mean_std(&per_seed);
            Ok(ComparisonRow {
                policy: np.name.clone(),
                mean_return,
                std_return,
                final_alignment: report.total.alignment_rate,
                per_seed_return: per_seed,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        seeds: seeds.to_vec(),
        horizon: cfg.horizon,
        gamma: cfg.gamma,
        rows,
    })
}

/// Candidates of `record` ordered by policy logit, ties by ascending id.
pub fn rank_candidates(params: &PolicyParams, record: &ExpertRecord, corpus: &KnowledgeCorpus) -> Result<RankingCase> {
    let feats = featurize_candidates(&record.state, &record.profile, &record.candidates, corpus)?;
    let logits = params.logits(&feats);
    let mut order: Vec<usize> = (0..record.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        logits[b]
            .total_cmp(&logits[a])
            .then_with(|| record.candidates[a].cmp(&record.candidates[b]))
    });
    RankingCase::new(
        order.into_iter().map(|i| record.candidates[i].clone()).collect(),
        record.grades.clone(),
    )
}

/// Candidates in retrieval order.
pub fn retrieval_ranking(record: &ExpertRecord) -> Result<RankingCase> {
    RankingCase::new(record.candidates.clone(), record.grades.clone())
}
