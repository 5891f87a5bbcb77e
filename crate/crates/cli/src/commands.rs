use std::fs;
use std::path::Path;

use log::warn;
use pxplore_core::compare::{compare_policies, rank_candidates, retrieval_ranking, ComparisonTable};
use pxplore_core::corpus::{generate_corpus, CorpusSpec};
use pxplore_core::expert::{ExpertDataset, Split};
use pxplore_core::metrics::{RankingCase, REPORT_COLUMNS};
use pxplore_core::pipeline::{default_planners, ranking_summary, split_learners, train_sft_on, GRPO, RETRIEVAL, SFT, UNIFORM};
use pxplore_core::policy::{action_distribution, featurize_candidates, plan_next, Checkpoint};
use pxplore_core::profiler::{profile_from_summaries, profile_query};
use pxplore_core::retrieval::retrieve;
use pxplore_core::training::train_grpo;
use pxplore_core::{Error, InteractionSummary, KnowledgeCorpus, LearnerState, PolicyParams, ValueParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::exit::{CliResult, Failure, WithCode, DOMAIN, INPUT, INSUFFICIENT};

/// A learner's session log: interaction summaries, the current state and
/// the actions already taken.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionLog {
    #[serde(default)]
    pub learner_id: Option<String>,
    #[serde(default)]
    pub state: Option<LearnerState>,
    pub summaries: Vec<InteractionSummary>,
    #[serde(default)]
    pub history: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainMode {
    Sft,
    Grpo,
    Both,
}

fn read(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).code(INPUT, format!("cannot read {what} {}", path.display()))
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).code(INPUT, format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, contents).code(INPUT, format!("cannot write {}", path.display()))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path, what: &str) -> CliResult<T> {
    serde_json::from_str(text).code(INPUT, format!("malformed {what} {}", path.display()))
}

fn load_corpus(path: &Path) -> CliResult<KnowledgeCorpus> {
    let text = read(path, "corpus")?;
    KnowledgeCorpus::from_json(&text).code(INPUT, format!("malformed corpus {}", path.display()))
}

fn load_dataset(path: &Path) -> CliResult<ExpertDataset> {
    let text = read(path, "dataset")?;
    ExpertDataset::from_json(&text).code(INPUT, format!("malformed dataset {}", path.display()))
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let text = read(path, "checkpoint")?;
    Checkpoint::from_json(&text).code(INPUT, format!("bad checkpoint {}", path.display()))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn corpus_gen(cfg: &RunConfig, spec_path: Option<&Path>) -> CliResult<Value> {
    let mut spec = match spec_path {
        Some(p) => parse::<CorpusSpec>(&read(p, "corpus spec")?, p, "corpus spec")?,
        None => cfg.benchmark.corpus.clone(),
    };
    spec.seed = cfg.seeds.corpus;
    let corpus = generate_corpus(&spec)?;
    if corpus.is_empty() {
        warn!("corpus spec declares no actions; writing an empty corpus");
    }
    write(&cfg.paths.corpus, &corpus.to_json()?)?;
    let stats = corpus.stats();
    Ok(json!({
        "command": "corpus-gen",
        "corpus": path_str(&cfg.paths.corpus),
        "actions": stats.actions,
        "clusters": spec.clusters.iter().filter(|c| c.actions > 0).count(),
        "vocabulary": stats.vocabulary,
        "seed": spec.seed,
    }))
}

pub fn dataset_build(cfg: &RunConfig, sessions: Option<usize>) -> CliResult<Value> {
    let corpus = load_corpus(&cfg.paths.corpus)?;
    let k = cfg.benchmark.expert.retrieval.k;
    if corpus.len() < k {
        return Err(Failure::new(
            INSUFFICIENT,
            format!("corpus has {} actions, fewer than the candidate count {k}", corpus.len()),
        ));
    }
    let n = sessions.unwrap_or(cfg.benchmark.sessions);
    let (dataset, _) = ExpertDataset::build(&corpus, &cfg.benchmark.population, &cfg.benchmark.expert, n, cfg.seeds.data)?;
    if dataset.split(Split::Train).next().is_none() {
        return Err(Failure::new(INSUFFICIENT, "dataset has no training records"));
    }
    write(&cfg.paths.dataset, &dataset.to_json()?)?;
    eprintln!("{}", dataset.stats.table());
    Ok(json!({
        "command": "dataset-build",
        "dataset": path_str(&cfg.paths.dataset),
        "sessions": dataset.records.len(),
        "stats": dataset.stats,
        "seed": cfg.seeds.data,
    }))
}

fn jsonl<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).code(DOMAIN, "cannot serialise log")?);
        out.push('\n');
    }
    Ok(out)
}

pub fn train(cfg: &RunConfig, mode: TrainMode) -> CliResult<Value> {
    cfg.benchmark.train.validate()?;
    let corpus = load_corpus(&cfg.paths.corpus)?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let mut summary = json!({ "command": "train" });
    let mut warnings: Vec<String> = Vec::new();

    let mut start: Option<PolicyParams> = None;
    if matches!(mode, TrainMode::Sft | TrainMode::Both) {
        let out = match train_sft_on(&dataset, &corpus, &cfg.benchmark.train, cfg.sft_seed()) {
            Err(Error::InvalidArgument(msg)) if msg.contains("no training records") => {
                return Err(Failure::new(INSUFFICIENT, msg));
            }
            r => r?,
        };
        write(&cfg.paths.sft_checkpoint, &Checkpoint::new(&out.params, &ValueParams::default()).to_json()?)?;
        write(&cfg.paths.sft_log, &jsonl(&out.log)?)?;
        summary["sft"] = json!({
            "checkpoint": path_str(&cfg.paths.sft_checkpoint),
            "log": path_str(&cfg.paths.sft_log),
            "epochs": out.log.len(),
            "initial_loss": out.initial_loss,
            "final_loss": out.final_loss(),
        });
        start = Some(out.params);
    }

    if matches!(mode, TrainMode::Grpo | TrainMode::Both) {
        let params0 = match start {
            Some(p) => p,
            None if cfg.paths.sft_checkpoint.exists() => load_checkpoint(&cfg.paths.sft_checkpoint)?.policy()?,
            None => {
                let msg = format!(
                    "no SFT checkpoint at {}; GRPO starts from zero parameters",
                    cfg.paths.sft_checkpoint.display()
                );
                warn!("{msg}");
                warnings.push(msg);
                PolicyParams::zeros()
            }
        };
        let learners = dataset.learners(&corpus)?;
        let train_learners = split_learners(&dataset, &learners, Split::Train);
        if train_learners.is_empty() {
            return Err(Failure::new(INSUFFICIENT, "dataset has no training learners"));
        }
        let out = match train_grpo(&params0, &train_learners, &corpus, &cfg.benchmark.train.grpo, &cfg.benchmark.episode, cfg.grpo_seed()) {
            Err(Error::Diverged { epoch, last_good }) => {
                write(&cfg.paths.grpo_checkpoint, &Checkpoint::new(&last_good, &ValueParams::default()).to_json()?)?;
                return Err(Failure::new(
                    DOMAIN,
                    format!(
                        "GRPO diverged at epoch {epoch}; last good parameters written to {}",
                        cfg.paths.grpo_checkpoint.display()
                    ),
                ));
            }
            r => r?,
        };
        write(&cfg.paths.grpo_checkpoint, &Checkpoint::new(&out.params, &out.value).to_json()?)?;
        write(&cfg.paths.grpo_log, &jsonl(&out.log)?)?;
        summary["grpo"] = json!({
            "checkpoint": path_str(&cfg.paths.grpo_checkpoint),
            "log": path_str(&cfg.paths.grpo_log),
            "epochs": out.log.len(),
            "final_mean_return": out.log.last().map(|l| l.mean_return),
        });
    }
    summary["warnings"] = json!(warnings);
    summary["seed"] = json!(cfg.seeds.train);
    Ok(summary)
}

fn load_session(path: &Path) -> CliResult<SessionLog> {
    let log: SessionLog = parse(&read(path, "session log")?, path, "session log")?;
    for s in &log.summaries {
        s.validate()?;
    }
    Ok(log)
}

pub fn profile(cfg: &RunConfig, session: &Path) -> CliResult<Value> {
    let log = load_session(session)?;
    let p = profile_from_summaries(&log.summaries, &cfg.benchmark.episode.profiler)?;
    Ok(json!({ "command": "profile", "learner_id": log.learner_id, "profile": p }))
}

pub fn plan(cfg: &RunConfig, session: &Path, checkpoint: Option<&Path>) -> CliResult<Value> {
    let log = load_session(session)?;
    let state = log
        .state
        .as_ref()
        .ok_or_else(|| Failure::new(INPUT, "session log has no learner state"))?;
    let ck_path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None if cfg.paths.grpo_checkpoint.exists() => cfg.paths.grpo_checkpoint.clone(),
        None => cfg.paths.sft_checkpoint.clone(),
    };
    let ck = load_checkpoint(&ck_path)?;
    let corpus = load_corpus(&cfg.paths.corpus)?;
    let episode = &cfg.benchmark.episode;
    let profile = profile_from_summaries(&log.summaries, &episode.profiler)?;
    let candidates = retrieve(&profile_query(&profile), &corpus, &log.history, &episode.retrieval)?;
    if candidates.is_empty() {
        return Err(Failure::new(DOMAIN, "corpus exhausted: no candidate actions remain"));
    }
    let policy = ck.policy()?;
    let chosen = plan_next(&policy, &ck.value(), None, state, &profile, &candidates, episode.gamma, &corpus)?;
    let ids = candidates.id_vec();
    let feats = featurize_candidates(state, &profile, &ids, &corpus)?;
    let logits = policy.logits(&feats);
    let dist = action_distribution(&policy, state, &profile, &candidates, &corpus)?;
    let scored: Vec<Value> = candidates
        .ranked
        .iter()
        .zip(&logits)
        .zip(&dist.probs)
        .map(|((c, logit), p)| {
            json!({
                "id": c.id,
                "retrieval_score": c.score,
                "logit": logit,
                "probability": p,
            })
        })
        .collect();
    Ok(json!({
        "command": "plan",
        "checkpoint": path_str(&ck_path),
        "learner_id": log.learner_id,
        "chosen": chosen,
        "rationale": { "profile": profile, "candidates": scored },
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingRow {
    pub policy: String,
    pub p_at_1: f64,
    /// NDCG at 1, 3, 5, 7 and 10.
    pub ndcg: [f64; 5],
}

const NDCG_CUTOFFS: [usize; 5] = [1, 3, 5, 7, 10];

fn ranking_row(policy: &str, cases: &[RankingCase]) -> CliResult<RankingRow> {
    let (p_at_1, ndcg) = ranking_summary(cases)?;
    Ok(RankingRow {
        policy: policy.to_string(),
        p_at_1,
        ndcg,
    })
}

fn ranking_csv(rows: &[RankingRow]) -> String {
    let cuts: Vec<String> = NDCG_CUTOFFS.iter().map(|k| format!("ndcg@{k}")).collect();
    let mut out = format!("policy,p@1,{}\n", cuts.join(","));
    for r in rows {
        let vals: Vec<String> = r.ndcg.iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&format!("{},{:.4},{}\n", r.policy, r.p_at_1, vals.join(",")));
    }
    out
}

fn alignment_csv(table: &ComparisonTable) -> String {
    let mut out = format!("policy,metric,{}\n", REPORT_COLUMNS.join(","));
    for row in &table.rows {
        for line in row.report.to_csv().lines().skip(1) {
            out.push_str(&format!("{},{line}\n", row.policy));
        }
    }
    out
}

/// What `eval` leaves behind for `report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub comparison: ComparisonTable,
    pub ranking: Vec<RankingRow>,
}

pub fn eval(cfg: &RunConfig, sft_path: Option<&Path>, grpo_path: Option<&Path>) -> CliResult<Value> {
    if cfg.seeds.eval.is_empty() {
        return Err(Failure::new(INPUT, "evaluation seed list is empty"));
    }
    let sft_path = sft_path.unwrap_or(&cfg.paths.sft_checkpoint);
    let grpo_path = grpo_path.unwrap_or(&cfg.paths.grpo_checkpoint);
    let sft = load_checkpoint(sft_path)?;
    let grpo = load_checkpoint(grpo_path)?;
    let corpus = load_corpus(&cfg.paths.corpus)?;
    let dataset = load_dataset(&cfg.paths.dataset)?;
    let learners = dataset.learners(&corpus)?;
    let test = split_learners(&dataset, &learners, Split::Test);
    if test.is_empty() {
        return Err(Failure::new(INSUFFICIENT, "dataset has no test learners"));
    }

    let (sft_params, grpo_params) = (sft.policy()?, grpo.policy()?);
    let planners = default_planners(&sft_params, &grpo_params, &grpo.value(), cfg.benchmark.act_mode);
    let comparison = compare_policies(&planners, &test, &corpus, &cfg.benchmark.eval_episode(), &cfg.seeds.eval)?;

    let records: Vec<_> = dataset.split(Split::Test).collect();
    let retrieval_cases = records.iter().map(|r| retrieval_ranking(r)).collect::<Result<Vec<_>, _>>()?;
    let rank = |p: &PolicyParams| records.iter().map(|r| rank_candidates(p, r, &corpus)).collect::<Result<Vec<_>, _>>();
    let ranking = vec![
        ranking_row(RETRIEVAL, &retrieval_cases)?,
        ranking_row(SFT, &rank(&sft_params)?)?,
        ranking_row(GRPO, &rank(&grpo_params)?)?,
    ];

    let dir = &cfg.paths.reports;
    write(&dir.join("comparison.csv"), &comparison.to_csv())?;
    write(&dir.join("alignment.csv"), &alignment_csv(&comparison))?;
    write(&dir.join("ranking.csv"), &ranking_csv(&ranking))?;
    let record = EvalRecord { comparison, ranking };
    write(
        &dir.join("eval.json"),
        &serde_json::to_string_pretty(&record).code(DOMAIN, "cannot serialise report")?,
    )?;

    let returns: serde_json::Map<String, Value> = record
        .comparison
        .rows
        .iter()
        .map(|r| (r.policy.clone(), json!(r.mean_return)))
        .collect();
    Ok(json!({
        "command": "eval",
        "reports": path_str(dir),
        "seeds": cfg.seeds.eval,
        "test_learners": test.len(),
        "mean_return": returns,
        "p_at_1": record.ranking.iter().map(|r| (r.policy.clone(), json!(r.p_at_1))).collect::<serde_json::Map<_, _>>(),
    }))
}

fn markdown(record: &EvalRecord) -> String {
    let mut out = String::from("# Evaluation report\n\n## Mean discounted return\n\n");
    out.push_str("| policy | mean | std | final alignment % |\n|---|---|---|---|\n");
    for r in &record.comparison.rows {
        out.push_str(&format!(
            "| {} | {:.4} | {:.4} | {:.2} |\n",
            r.policy, r.mean_return, r.std_return, r.final_alignment
        ));
    }
    out.push_str(&format!("\n## Alignment rate (%)\n\n| policy | {} |\n|---", REPORT_COLUMNS.join(" | ")));
    out.push_str(&"|---".repeat(REPORT_COLUMNS.len()));
    out.push_str("|\n");
    for r in &record.comparison.rows {
        let cells: Vec<String> = r.report.columns().iter().map(|c| format!("{:.2}", c.alignment_rate)).collect();
        out.push_str(&format!("| {} | {} |\n", r.policy, cells.join(" | ")));
    }
    out.push_str("\n## Ranking on held-out records\n\n| policy | P@1 | NDCG@1 | NDCG@3 | NDCG@5 | NDCG@7 | NDCG@10 |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for r in &record.ranking {
        let cells: Vec<String> = r.ndcg.iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&format!("| {} | {:.4} | {} |\n", r.policy, r.p_at_1, cells.join(" | ")));
    }
    out
}

pub fn report(cfg: &RunConfig) -> CliResult<Value> {
    let path = cfg.paths.reports.join("eval.json");
    let record: EvalRecord = parse(&read(&path, "evaluation record")?, &path, "evaluation record")?;
    let out = cfg.paths.reports.join("report.md");
    write(&out, &markdown(&record))?;
    let ret = |name: &str| record.comparison.row(name).map(|r| r.mean_return);
    let ordered = match (ret(GRPO), ret(SFT), ret(RETRIEVAL), ret(UNIFORM)) {
        (Some(g), Some(s), Some(r), Some(u)) => Some(g > s && s > r && r > u),
        _ => None,
    };
    let lift = match (ret(GRPO), ret(UNIFORM)) {
        (Some(g), Some(u)) if u > 0.0 => Some(g / u - 1.0),
        _ => None,
    };
    Ok(json!({
        "command": "report",
        "report": path_str(&out),
        "ordering_holds": ordered,
        "grpo_lift_over_uniform": lift,
    }))
}
