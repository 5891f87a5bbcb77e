//! The default synthetic benchmark: corpus, population and expert dataset,
//! SFT then GRPO, and a paired comparison on held-out learners.

use serde::{Deserialize, Serialize};

use crate::compare::{compare_policies, rank_candidates, ActMode, ComparisonTable, NamedPlanner, Planner};
use crate::corpus::{generate_corpus, CorpusSpec, KnowledgeCorpus};
use crate::error::{Error, Result};
use crate::expert::{ExpertConfig, ExpertDataset, Split};
use crate::metrics::{mean_ndcg, precision_at_1, RankingCase};
use crate::policy::{PolicyParams, ValueParams};
use crate::rng;
use crate::rollout::EpisodeConfig;
use crate::sim::{SimLearner, SimPopulationConfig};
use crate::training::{sft_examples, train_grpo, train_sft, GrpoOutcome, SftOutcome, TrainConfig};

pub const UNIFORM: &str = "uniform";
pub const RETRIEVAL: &str = "retrieval-only";
pub const SFT: &str = "sft";
pub const GRPO: &str = "grpo";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub corpus: CorpusSpec,
    pub population: SimPopulationConfig,
    pub sessions: usize,
    pub expert: ExpertConfig,
    pub train: TrainConfig,
    pub episode: EpisodeConfig,
    pub act_mode: ActMode,
    /// Evaluation seeds per benchmark seed.
    pub eval_rollouts: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSpec::default(),
            population: SimPopulationConfig::default(),
            sessions: 300,
            expert: ExpertConfig::default(),
            train: TrainConfig::default(),
            episode: EpisodeConfig::default(),
            act_mode: ActMode::Sample,
            eval_rollouts: 4,
        }
    }
}

/// Everything one benchmark seed produces.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub seed: u64,
    pub corpus: KnowledgeCorpus,
    pub dataset: ExpertDataset,
    pub learners: Vec<SimLearner>,
    pub sft: SftOutcome,
    pub grpo: GrpoOutcome,
    pub sft_p_at_1: f64,
    pub comparison: ComparisonTable,
}

impl BenchmarkConfig {
    /// Evaluation episodes use the GRPO horizon and discount.
    pub fn eval_episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            horizon: self.train.grpo.horizon,
            gamma: self.train.grpo.gamma,
            ..self.episode.clone()
        }
    }

    pub fn eval_seeds(&self, seed: u64) -> Vec<u64> {
        (0..self.eval_rollouts.max(1) as u64).map(|i| rng::derive(seed, 100 + i)).collect()
    }
}

pub fn split_learners(dataset: &ExpertDataset, learners: &[SimLearner], split: Split) -> Vec<SimLearner> {
    let ids = dataset.learner_ids(split);
    learners.iter().filter(|l| ids.contains(l.learner_id.as_str())).cloned().collect()
}

/// Ranking cases of `params` over the records of `split`.
pub fn ranking_cases(
    params: &PolicyParams,
    dataset: &ExpertDataset,
    split: Split,
    corpus: &KnowledgeCorpus,
) -> Result<Vec<RankingCase>> {
    dataset.split(split).map(|r| rank_candidates(params, r, corpus)).collect()
}

pub fn ranking_summary(cases: &[RankingCase]) -> Result<(f64, [f64; 5])> {
    let p1 = precision_at_1(cases)?;
    let mut ndcg = [0.0; 5];
    for (slot, k) in ndcg.iter_mut().zip([1, 3, 5, 7, 10]) {
        *slot = mean_ndcg(cases, k)?;
    }
    Ok((p1, ndcg))
}

pub fn train_sft_on(dataset: &ExpertDataset, corpus: &KnowledgeCorpus, cfg: &TrainConfig, seed: u64) -> Result<SftOutcome> {
    let data = sft_examples(dataset.split(Split::Train), corpus)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset has no training records".into()));
    }
    train_sft(&PolicyParams::zeros(), &data, &cfg.sft, seed)
}

pub fn run_benchmark(cfg: &BenchmarkConfig, seed: u64) -> Result<BenchmarkRun> {
    cfg.train.validate()?;
    let corpus = generate_corpus(&cfg.corpus)?;
    let (dataset, learners) = ExpertDataset::build(&corpus, &cfg.population, &cfg.expert, cfg.sessions, seed)?;
    let sft = train_sft_on(&dataset, &corpus, &cfg.train, rng::derive(seed, 1))?;
    let train_learners = split_learners(&dataset, &learners, Split::Train);
    let grpo = train_grpo(&sft.params, &train_learners, &corpus, &cfg.train.grpo, &cfg.episode, rng::derive(seed, 2))?;
    let sft_p_at_1 = precision_at_1(&ranking_cases(&sft.params, &dataset, Split::Test, &corpus)?)?;

    let test_learners = split_learners(&dataset, &learners, Split::Test);
    let planners = default_planners(&sft.params, &grpo.params, &grpo.value, cfg.act_mode);
    let comparison = compare_policies(&planners, &test_learners, &corpus, &cfg.eval_episode(), &cfg.eval_seeds(seed))?;
    Ok(BenchmarkRun {
        seed,
        corpus,
        dataset,
        learners,
        sft,
        grpo,
        sft_p_at_1,
        comparison,
    })
}

pub fn default_planners(sft: &PolicyParams, grpo: &PolicyParams, value: &ValueParams, mode: ActMode) -> Vec<NamedPlanner> {
    vec![
        NamedPlanner::new(UNIFORM, Planner::Uniform),
        NamedPlanner::new(RETRIEVAL, Planner::RetrievalOnly),
        NamedPlanner::new(SFT, Planner::Learned { params: sft.clone(), value: value.clone(), mode }),
        NamedPlanner::new(GRPO, Planner::Learned { params: grpo.clone(), value: value.clone(), mode }),
    ]
}
