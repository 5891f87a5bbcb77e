//! Shared fixtures for the criterion benchmarks in `benches/`.

use pxplore_core::corpus::generate_corpus;
use pxplore_core::expert::ExpertDataset;
use pxplore_core::pipeline::{split_learners, BenchmarkConfig};
use pxplore_core::training::{sft_examples, SftExample};
use pxplore_core::{KnowledgeCorpus, SimLearner};

pub struct Fixture {
    pub config: BenchmarkConfig,
    pub corpus: KnowledgeCorpus,
    pub dataset: ExpertDataset,
    pub train_learners: Vec<SimLearner>,
    pub sft_data: Vec<SftExample>,
}

/// Default corpus with a dataset of `sessions` learners.
pub fn fixture(sessions: usize, seed: u64) -> Fixture {
    let config = BenchmarkConfig::default();
    let corpus = generate_corpus(&config.corpus).expect("default corpus");
    let (dataset, learners) = ExpertDataset::build(&corpus, &config.population, &config.expert, sessions, seed).expect("dataset");
    let train_learners = split_learners(&dataset, &learners, pxplore_core::expert::Split::Train);
    let sft_data = sft_examples(dataset.split(pxplore_core::expert::Split::Train), &corpus).expect("sft examples");
    Fixture {
        config,
        corpus,
        dataset,
        train_learners,
        sft_data,
    }
}
