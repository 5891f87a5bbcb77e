use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pxplore_bench::fixture;
use pxplore_core::expert::Split;
use pxplore_core::pipeline::ranking_cases;
use pxplore_core::policy::plan_next;
use pxplore_core::profiler::profile_query;
use pxplore_core::retrieval::retrieve;
use pxplore_core::reward::compute_reward;
use pxplore_core::rollout::{run_episode, Chooser};
use pxplore_core::training::{grpo_advantages, grpo_objective_and_grad, sample_group, sft_loss_and_grad};
use pxplore_core::{rng, PolicyParams, ValueParams};

fn retrieval(c: &mut Criterion) {
    let fx = fixture(20, 1);
    let rec = &fx.dataset.records[0];
    let cfg = fx.config.expert.retrieval;
    c.bench_function("retrieve top-10 of 148", |b| {
        b.iter(|| retrieve(black_box(&rec.profile_query), &fx.corpus, &[], &cfg).unwrap())
    });
    let query = profile_query(&rec.profile);
    let history: Vec<String> = fx.corpus.ids().take(100).map(str::to_string).collect();
    c.bench_function("retrieve with 100 taken", |b| {
        b.iter(|| retrieve(black_box(&query), &fx.corpus, &history, &cfg).unwrap())
    });
}

fn reward_and_planning(c: &mut Criterion) {
    let fx = fixture(20, 2);
    let learner = &fx.train_learners[0];
    let rec = fx.dataset.records.iter().find(|r| r.learner_id == learner.learner_id).unwrap();
    let next = learner.step(&fx.corpus, &rec.best).unwrap().state;
    let weights = fx.config.episode.weights;
    c.bench_function("compute_reward", |b| {
        b.iter(|| compute_reward(black_box(learner.state()), black_box(&next), &weights).unwrap())
    });
    let cands = retrieve(&rec.profile_query, &fx.corpus, &[], &fx.config.expert.retrieval).unwrap();
    let params = PolicyParams::zeros();
    let value = ValueParams::default();
    c.bench_function("plan_next deployment", |b| {
        b.iter(|| plan_next(&params, &value, None, &rec.state, &rec.profile, black_box(&cands), 0.9, &fx.corpus).unwrap())
    });
    c.bench_function("episode horizon 5, sampled", |b| {
        b.iter_batched(
            || rng::rng_from(3),
            |mut r| run_episode(learner, &fx.corpus, Chooser::Sample(&params), None, &value, &fx.config.episode, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn training(c: &mut Criterion) {
    let fx = fixture(60, 3);
    let params = PolicyParams::zeros();
    c.bench_function("sft loss+grad, full train split", |b| {
        b.iter(|| sft_loss_and_grad(black_box(&params), &fx.sft_data).unwrap())
    });
    let grpo = &fx.config.train.grpo;
    let envs = vec![fx.train_learners[0].clone(); grpo.group_size];
    let value = ValueParams::default();
    let group = sample_group(&params, &value, &envs, &fx.corpus, &fx.config.episode, 4).unwrap();
    let adv = grpo_advantages(&group, grpo.gamma, grpo.epsilon);
    c.bench_function("grpo objective+grad, one group", |b| {
        b.iter(|| grpo_objective_and_grad(black_box(&params), &group, &adv, grpo.clip_ratio).unwrap())
    });
    c.bench_function("sample one GRPO group", |b| {
        b.iter(|| sample_group(&params, &value, black_box(&envs), &fx.corpus, &fx.config.episode, 5).unwrap())
    });
    c.bench_function("rank held-out records", |b| {
        b.iter(|| ranking_cases(black_box(&params), &fx.dataset, Split::Test, &fx.corpus).unwrap())
    });
}

criterion_group!(benches, retrieval, reward_and_planning, training);
criterion_main!(benches);
