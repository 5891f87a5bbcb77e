//! `pxplore`: corpus generation, expert datasets, SFT + GRPO training,
//! planning and evaluation reports.
//!
//! Each command prints one JSON summary on stdout. Exit codes: 0 success,
//! 2 config or input error, 3 data insufficiency, 4 runtime domain error.

mod commands;
mod config;
mod exit;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use serde_json::json;

use crate::commands::TrainMode;
use crate::config::RunConfig;
use crate::exit::{CliResult, Failure, WithCode, INPUT, OK};

#[derive(Debug, Parser)]
#[command(name = "pxplore", version, about = "Goal-driven learning path planning")]
struct Cli {
    /// JSON run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sets every seed. PXPLORE_SEED takes precedence when set.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that relative artifact paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus of learning actions.
    CorpusGen {
        /// Corpus spec JSON; the config's benchmark.corpus block otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Simulate sessions and label them with the lookahead expert.
    DatasetBuild {
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Train the policy.
    Train {
        #[arg(long, value_enum, default_value = "both")]
        mode: TrainMode,
    },
    /// Profile a session log.
    Profile {
        #[arg(long)]
        session: PathBuf,
    },
    /// Pick the next action for a session log.
    Plan {
        #[arg(long)]
        session: PathBuf,
        /// Defaults to the GRPO checkpoint, then the SFT one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare uniform, retrieval-only, SFT and GRPO on held-out learners.
    Eval {
        #[arg(long)]
        sft: Option<PathBuf>,
        #[arg(long)]
        grpo: Option<PathBuf>,
    },
    /// Render the last evaluation as markdown.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CorpusGen { .. } => "corpus-gen",
            Command::DatasetBuild { .. } => "dataset-build",
            Command::Train { .. } => "train",
            Command::Profile { .. } => "profile",
            Command::Plan { .. } => "plan",
            Command::Eval { .. } => "eval",
            Command::Report => "report",
        }
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("PXPLORE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .code(INPUT, format!("PXPLORE_SEED `{s}` is not a 64-bit unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::new(INPUT, e)),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).code(INPUT, format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).code(INPUT, format!("malformed config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = env_seed()?.or(seed) {
        cfg.override_seeds(s);
    }
    cfg.paths.resolve(out);
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    let cfg = load_config(cli.config.as_deref(), cli.seed, &cli.out)?;
    match &cli.command {
        Command::CorpusGen { spec } => commands::corpus_gen(&cfg, spec.as_deref()),
        Command::DatasetBuild { sessions } => commands::dataset_build(&cfg, *sessions),
        Command::Train { mode } => commands::train(&cfg, *mode),
        Command::Profile { session } => commands::profile(&cfg, session),
        Command::Plan { session, checkpoint } => commands::plan(&cfg, session, checkpoint.as_deref()),
        Command::Eval { sft, grpo } => commands::eval(&cfg, sft.as_deref(), grpo.as_deref()),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (summary, code) = match run(&cli) {
        Ok(mut s) => {
            s["status"] = json!("ok");
            (s, OK)
        }
        Err(f) => {
            error!("{:#}", f.error);
            let s = json!({
                "command": cli.command.name(),
                "status": "error",
                "exit_code": f.code,
                "error": format!("{:#}", f.error),
            });
            (s, f.code)
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
    ExitCode::from(code)
}
