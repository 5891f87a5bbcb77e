//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pxplore_core::corpus::generate_corpus;
use pxplore_core::expert::{ExpertDataset, Split};
use pxplore_core::metrics::{ndcg_at_k, ndcg_grades, precision_at_1};
use pxplore_core::pipeline::{ranking_cases, run_benchmark, train_sft_on, BenchmarkConfig, GRPO, RETRIEVAL, SFT, UNIFORM};
use pxplore_core::policy::{log_softmax, FeatureVector, FEATURE_DIM};
use pxplore_core::profiler::Persona;
use pxplore_core::retrieval::{retrieve, RetrievalConfig};
use pxplore_core::reward::compute_reward;
use pxplore_core::rng::rng_from;
use pxplore_core::state::StateComponent;
use pxplore_core::training::{
    grad_check, grpo_objective, grpo_objective_and_grad, normalize_advantages, sft_loss, sft_loss_and_grad, SftExample,
};
use pxplore_core::{
    BloomLevel, ComponentStatus, Dimension, KnowledgeCorpus, LearnerProfile, LearnerState, PolicyParams, RankingCase,
    RewardBreakdown, RewardWeights, TokenBag, TrajectoryStep,
};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn within(elapsed: Duration, limit_s: u64, out: Outcome) -> Outcome {
    let out = out?;
    if elapsed > Duration::from_secs(limit_s) {
        return Err(format!("{out}; took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()));
    }
    Ok(out)
}

// Reward oracle

fn random_component(rng: &mut impl Rng, id: String) -> StateComponent {
    StateComponent {
        id,
        dimension: Dimension::ALL[rng.random_range(0..4)],
        description: String::new(),
        metric_name: "m".into(),
        threshold: 0.5,
        evidence: vec![],
        confidence: rng.random(),
        status: if rng.random_bool(0.5) {
            ComponentStatus::Aligned
        } else {
            ComponentStatus::NotAligned
        },
    }
}

/// Sum over components of the next state of w * c * (aligned_next - aligned_prev),
/// written without the crate's lookup helpers.
fn reward_oracle(prev: &LearnerState, next: &LearnerState, w: [f64; 4]) -> f64 {
    let mut total = 0.0;
    for c in next.components() {
        let mut before = 0.0;
        for p in prev.components() {
            if p.id == c.id && p.status == ComponentStatus::Aligned {
                before = 1.0;
            }
        }
        let after = if c.status == ComponentStatus::Aligned { 1.0 } else { 0.0 };
        let wd = match c.dimension {
            Dimension::LongTermObjective => w[0],
            Dimension::ShortTermObjective => w[1],
            Dimension::ImplicitMotivation => w[2],
            Dimension::ExplicitMotivation => w[3],
        };
        total += wd * c.confidence * (after - before);
    }
    total
}

fn reward_oracle_equivalence() -> Outcome {
    let mut rng = rng_from(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(0..12);
        let prev_comps: Vec<_> = (0..n).map(|i| random_component(&mut rng, format!("c{i}"))).collect();
        let prev = LearnerState::from_parts(rng.random_range(0..50), prev_comps).unwrap();
        let mut next = prev.advance();
        for i in 0..n {
            if rng.random_bool(0.4) {
                let c = next.get_mut(&format!("c{i}")).unwrap();
                c.status = if c.is_aligned() {
                    ComponentStatus::NotAligned
                } else {
                    ComponentStatus::Aligned
                };
                c.confidence = rng.random();
            }
        }
        for j in 0..rng.random_range(0..3) {
            next.push(random_component(&mut rng, format!("new{j}"))).unwrap();
        }
        let w = [0.0; 4].map(|_: f64| rng.random_range(0.0..2.0));
        let got = compute_reward(&prev, &next, &RewardWeights::new(w).unwrap()).unwrap().total;
        worst = worst.max((got - reward_oracle(&prev, &next, w)).abs());
    }
    check(
        worst < 1e-12,
        format!("max abs error {worst:.1e} over 1000 pairs"),
        format!("max abs error {worst:.3e} >= 1e-12"),
    )
}

// Advantage normalisation

fn advantage_normalization() -> Outcome {
    let eps = 1e-8;
    let mut rng = rng_from(2);
    let (mut worst_mean, mut worst_std): (f64, f64) = (0.0, 0.0);
    let mut groups = 0;
    while groups < 100 {
        let g = rng.random_range(2..9);
        let raw: Vec<Vec<f64>> = (0..g)
            .map(|_| (0..rng.random_range(1..6)).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let flat: Vec<f64> = raw.iter().flatten().copied().collect();
        let n = flat.len() as f64;
        let mu = flat.iter().sum::<f64>() / n;
        let sigma = (flat.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / n).sqrt();
        if sigma <= 100.0 * eps {
            continue;
        }
        groups += 1;
        let out: Vec<f64> = normalize_advantages(&raw, eps).into_iter().flatten().collect();
        let m = out.iter().sum::<f64>() / n;
        let s = (out.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(m.abs());
        worst_std = worst_std.max((s - 1.0).abs());
    }
    let hand = normalize_advantages(&[vec![0.5, 1.5]], eps);
    let hand_err = (hand[0][0] + 1.0).abs().max((hand[0][1] - 1.0).abs());
    check(
        worst_mean < 1e-6 && worst_std < 1e-6 && hand_err < 1e-7,
        format!("|mean| <= {worst_mean:.1e}, |std-1| <= {worst_std:.1e}, hand case error {hand_err:.1e}"),
        format!("|mean| {worst_mean:.3e}, |std-1| {worst_std:.3e}, hand case error {hand_err:.3e}"),
    )
}

// Gradient checks

fn random_features(rng: &mut impl Rng, n: usize) -> Vec<FeatureVector> {
    (0..n)
        .map(|_| FeatureVector([0.0; FEATURE_DIM].map(|_: f64| rng.random_range(-1.0..1.0))))
        .collect()
}

fn random_params(rng: &mut impl Rng) -> PolicyParams {
    let theta = [0.0; FEATURE_DIM].map(|_: f64| rng.random_range(-1.0..1.0));
    PolicyParams::new(theta, rng.random_range(0.3..2.0)).unwrap()
}

fn step(features: Vec<FeatureVector>, chosen: usize, log_prob_old: f64, reward: f64) -> TrajectoryStep {
    let s = LearnerState::from_parts(0, vec![]).unwrap();
    TrajectoryStep {
        next_state: s.advance(),
        state: s,
        profile: LearnerProfile {
            cognition: BloomLevel::Applying,
            engagement: 0.5,
            interest: TokenBag::default(),
            persona: Persona::Explorer,
        },
        candidates: (0..features.len()).map(|i| format!("k{i}")).collect(),
        features,
        chosen,
        log_prob_old,
        reward,
        breakdown: RewardBreakdown {
            total: reward,
            contributions: vec![],
        },
        state_features: [0.0; 8],
        next_state_features: [0.0; 8],
        value_s: 0.0,
        value_s_next: 0.0,
    }
}

fn gradient_verification() -> Outcome {
    let mut rng = rng_from(3);
    let h = 1e-5;
    let mut sft_worst: f64 = 0.0;
    for _ in 0..50 {
        let batch: Vec<SftExample> = (0..rng.random_range(1..20))
            .map(|_| {
                let n = rng.random_range(1..11);
                SftExample {
                    features: random_features(&mut rng, n),
                    target: rng.random_range(0..n),
                }
            })
            .collect();
        let p = random_params(&mut rng);
        let (_, g) = sft_loss_and_grad(&p, &batch).unwrap();
        let f = |x: &[f64]| {
            let mut q = p.clone();
            q.theta.copy_from_slice(x);
            sft_loss(&q, &batch).unwrap()
        };
        sft_worst = sft_worst.max(grad_check(f, &p.theta, &g, h));
    }
    let mut grpo_worst: f64 = 0.0;
    for i in 0..50 {
        let old = random_params(&mut rng);
        let group: Vec<Vec<TrajectoryStep>> = (0..rng.random_range(2..9))
            .map(|_| {
                (0..rng.random_range(1..6))
                    .map(|_| {
                        let n = rng.random_range(1..11);
                        let feats = random_features(&mut rng, n);
                        let chosen = rng.random_range(0..n);
                        let lp = log_softmax(&old.logits(&feats))[chosen];
                        step(feats, chosen, lp, rng.random_range(-1.0..2.0))
                    })
                    .collect()
            })
            .collect();
        let raw: Vec<Vec<f64>> = group.iter().map(|t| t.iter().map(|s| s.reward).collect()).collect();
        let adv = normalize_advantages(&raw, 1e-8);
        let cur = random_params(&mut rng);
        let cur = PolicyParams::new(cur.theta, old.temperature).unwrap();
        let clip = if i % 2 == 0 { None } else { Some(0.2) };
        let (_, g) = grpo_objective_and_grad(&cur, &group, &adv, clip).unwrap();
        let f = |x: &[f64]| {
            let mut q = cur.clone();
            q.theta.copy_from_slice(x);
            grpo_objective(&q, &group, &adv, clip).unwrap()
        };
        grpo_worst = grpo_worst.max(grad_check(f, &cur.theta, &g, h));
    }
    check(
        sft_worst < 1e-5 && grpo_worst < 1e-5,
        format!("max relative error SFT {sft_worst:.1e}, GRPO {grpo_worst:.1e} over 50 configs each"),
        format!("max relative error SFT {sft_worst:.3e}, GRPO {grpo_worst:.3e}"),
    )
}

// Training-order benchmark and SFT effectiveness

const BENCH_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

fn training_order_benchmark() -> Outcome {
    let cfg = BenchmarkConfig::default();
    let mut sums = [0.0; 4];
    let names = [GRPO, SFT, RETRIEVAL, UNIFORM];
    let n = BENCH_SEEDS.count() as f64;
    for seed in BENCH_SEEDS {
        let run = run_benchmark(&cfg, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        for (s, name) in sums.iter_mut().zip(names) {
            *s += run.comparison.row(name).unwrap().mean_return / n;
        }
    }
    let [g, s, r, u] = sums;
    let lift = g / u - 1.0;
    let line = format!("mean return grpo {g:.4} > sft {s:.4} > retrieval {r:.4} > uniform {u:.4}, grpo lift {:.1}%", 100.0 * lift);
    check(g > s && s > r && r > u && lift >= 0.25, line.clone(), format!("ordering or lift violated: {line}"))
}

fn sft_effectiveness() -> Outcome {
    let cfg = BenchmarkConfig::default();
    let corpus = generate_corpus(&cfg.corpus).unwrap();
    let mut p1s = Vec::new();
    for seed in BENCH_SEEDS {
        let (ds, _) = ExpertDataset::build(&corpus, &cfg.population, &cfg.expert, cfg.sessions, seed).unwrap();
        let sft = train_sft_on(&ds, &corpus, &cfg.train, pxplore_core::rng::derive(seed, 1)).unwrap();
        p1s.push(precision_at_1(&ranking_cases(&sft.params, &ds, Split::Test, &corpus).unwrap()).unwrap());
    }
    let mean = p1s.iter().sum::<f64>() / p1s.len() as f64;
    let line = format!(
        "mean held-out P@1 {mean:.3} (per seed {}) vs uniform 0.1",
        p1s.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ")
    );
    check(mean >= 0.3, line.clone(), format!("{line}; needs >= 0.3"))
}

// Ranking metrics

fn ranking_metric_oracles() -> Outcome {
    let worked = ndcg_grades(&[0, 2, 1], 3);
    let gain = |g: f64| 2f64.powf(g) - 1.0;
    let expect = (gain(2.0) / 3f64.log2() + gain(1.0) / 4f64.log2()) / (gain(2.0) + gain(1.0) / 3f64.log2());
    let mut rng = rng_from(6);
    let mut ideal_ok = true;
    let mut p1_ok = true;
    let mut cases = Vec::new();
    for _ in 0..500 {
        let n = rng.random_range(1..11);
        let mut grades: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        for k in 1..=n {
            ideal_ok &= ndcg_grades(&grades, k) == 1.0;
        }
        let ids: Vec<String> = (0..n).map(|j| format!("a{j}")).collect();
        let best = rng.random_range(0..n);
        let binary = ids
            .iter()
            .enumerate()
            .map(|(j, id)| (id.clone(), if j == best { 2 } else { 0 }))
            .collect();
        let mut ranked = ids.clone();
        ranked.shuffle(&mut rng);
        let case = RankingCase::new(ranked, binary).unwrap();
        p1_ok &= precision_at_1(std::slice::from_ref(&case)).unwrap() == ndcg_at_k(&case, 1).unwrap();
        cases.push(case);
    }
    let mean_ndcg1 = cases.iter().map(|c| ndcg_at_k(c, 1).unwrap()).sum::<f64>() / cases.len() as f64;
    p1_ok &= (precision_at_1(&cases).unwrap() - mean_ndcg1).abs() < 1e-12;
    check(
        (worked - 0.6590).abs() <= 1e-4 && (worked - expect).abs() < 1e-12 && ideal_ok && p1_ok,
        format!("worked case {worked:.4}, ideal permutations = 1, P@1 = NDCG@1 on 500 cases"),
        format!("worked case {worked:.6} (oracle {expect:.6}), ideal ok {ideal_ok}, P@1 consistency {p1_ok}"),
    )
}

// Retrieval contract

fn retrieval_contract() -> Outcome {
    let cfg = RetrievalConfig::default();
    if cfg.alpha != 0.2 || cfg.k != 10 {
        return Err(format!("defaults alpha {} k {}", cfg.alpha, cfg.k));
    }
    let base = generate_corpus(&BenchmarkConfig::default().corpus).unwrap();
    let actions: Vec<_> = base.actions().cloned().collect();
    let vocab: Vec<String> = actions.iter().flat_map(|a| a.keywords.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = rng_from(7);
    for shuffle in 0..200 {
        let mut order = actions.clone();
        order.shuffle(&mut rng);
        let shuffled = if shuffle % 2 == 0 {
            KnowledgeCorpus::new(order).unwrap()
        } else {
            let mut c = KnowledgeCorpus::new(vec![]).unwrap();
            for a in order {
                c.insert(a).unwrap();
            }
            c
        };
        let query = TokenBag::from_tokens((0..rng.random_range(1..6)).map(|_| vocab[rng.random_range(0..vocab.len())].clone()));
        let n_hist = [0, 3, 50, 140, 145, 148][shuffle % 6];
        let mut ids: Vec<String> = base.ids().map(str::to_string).collect();
        ids.shuffle(&mut rng);
        let history: Vec<String> = ids.into_iter().take(n_hist).collect();
        let want = retrieve(&query, &base, &history, &cfg).unwrap().id_vec();
        let got = retrieve(&query, &shuffled, &history, &cfg).unwrap().id_vec();
        if got != want {
            return Err(format!("shuffle {shuffle}: ranking depends on insertion order"));
        }
        if got.iter().any(|id| history.contains(id)) {
            return Err(format!("shuffle {shuffle}: returned a history item"));
        }
        let expect = 10.min(base.len() - history.len());
        if got.len() != expect {
            return Err(format!("shuffle {shuffle}: {} candidates, expected {expect}", got.len()));
        }
    }
    Ok("200 shuffles: order-invariant, history excluded, min(10, eligible) returned".into())
}

// CLI criteria

fn pxplore(dir: &Path, args: &[&str], seed: Option<u64>) -> Result<serde_json::Value, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pxplore"));
    cmd.arg("--out").arg(dir).args(args).env_remove("PXPLORE_SEED");
    if let Some(s) = seed {
        cmd.env("PXPLORE_SEED", s.to_string());
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stdout)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn dataset_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    pxplore(dir.path(), &["corpus-gen"], None)?;
    let s = pxplore(dir.path(), &["dataset-build"], None)?;
    let stats = &s["stats"];
    let count = |split: &str, col: &str| stats[split][col].as_u64().unwrap_or(0);
    let (total, train, test) = (count("total", "sessions"), count("train", "sessions"), count("test", "sessions"));
    let target = [("O_L", 326.0), ("O_S", 401.0), ("M_I", 338.0), ("M_E", 350.0)];
    let mut cells = Vec::new();
    let mut ok = (total, train, test) == (300, 250, 50);
    for (col, t) in target {
        let got = count("total", col) as f64;
        ok &= (got - t).abs() <= 0.1 * t;
        cells.push(format!("{col} {got} (target {t})"));
    }
    let line = format!("{total} sessions, {train}/{test} split; {}", cells.join(", "));
    check(ok, line.clone(), line)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn end_to_end_determinism() -> Outcome {
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for args in [&["corpus-gen"][..], &["dataset-build"], &["train", "--mode", "both"], &["eval"]] {
            pxplore(dir.path(), args, Some(42))?;
        }
        snaps.push(snapshot(dir.path()));
    }
    let names: Vec<&str> = snaps[0].iter().map(|(n, _)| n.as_str()).collect();
    for required in ["sft.ckpt.json", "grpo.ckpt.json", "reports/comparison.csv", "reports/alignment.csv", "reports/ranking.csv"] {
        if !names.contains(&required) {
            return Err(format!("missing artifact {required}"));
        }
    }
    check(
        snaps[0] == snaps[1],
        format!("{} artifacts byte-identical across two runs", names.len()),
        "artifacts differ between runs with the same PXPLORE_SEED".into(),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("reward oracle equivalence", 5, reward_oracle_equivalence),
        ("advantage normalization", 5, advantage_normalization),
        ("gradient verification", 30, gradient_verification),
        ("training-order benchmark", 600, training_order_benchmark),
        ("SFT effectiveness", 120, sft_effectiveness),
        ("ranking-metric oracles", 60, ranking_metric_oracles),
        ("retrieval contract", 60, retrieval_contract),
        ("dataset-shape fidelity", 120, dataset_shape),
        ("end-to-end determinism", 300, end_to_end_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let secs = elapsed.as_secs_f64();
        let out = within(elapsed, *limit, out);
        match out {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
