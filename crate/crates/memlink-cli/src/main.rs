//! `memlink` command-line interface.
//!
//! Subcommands: `ingest`, `build`, `retrieve`, `sweep`, `reward`,
//! `advantage`. Reports go to stdout (and `--out` when given); timing and
//! diagnostics go to stderr. Exit codes: 0 success, 1 input error, 2
//! provider error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use memlink::config::{ConfigOverlay, EngineConfig};
use memlink::corpus::load_history;
use memlink::harness::{
    cmd_advantage, cmd_build, cmd_retrieve, cmd_reward, cmd_sweep, load_context, load_gold,
    to_report_json, CompletionsFile, HarnessError, JudgeMode, QueryFile,
};
use memlink::pipeline::ProviderSet;
use memlink::retrieval::MemoryIndex;

#[derive(Parser)]
#[command(name = "memlink", version, about = "Segment-link conversational memory engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigFlags {
    /// JSON config file (any subset of fields, optional "profile").
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-k message hits.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Segment-boundary refinement threshold.
    #[arg(long, global = true)]
    tau1: Option<f64>,
    /// Segment-link similarity threshold.
    #[arg(long, global = true)]
    tau2: Option<f64>,
    /// Write the report/output to this path as well as stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a history file into the canonical format.
    Ingest {
        history: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Segment, link, and index a history; write the snapshot to --out.
    Build {
        history: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Retrieve candidates for each query in a query file.
    Retrieve {
        snapshot: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Grid-sweep tau1 x tau2 and report recall metrics per cell.
    Sweep {
        history: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Comma-separated tau1 values (defaults to the configured tau1).
        #[arg(long, value_delimiter = ',')]
        tau1_list: Vec<f64>,
        /// Comma-separated tau2 values (defaults to the configured tau2).
        #[arg(long, value_delimiter = ',')]
        tau2_list: Vec<f64>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Score a batch of completions against candidates and gold.
    Reward {
        #[arg(long)]
        completions: PathBuf,
        /// Candidates file: an evaluation context or a retrieve report.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "oracle")]
        judge_mode: String,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Compute group advantages (and the surrogate, when logprobs present).
    Advantage {
        group: PathBuf,
        /// Required when group entries carry raw text without span rewards.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "oracle")]
        judge_mode: String,
        #[command(flatten)]
        flags: ConfigFlags,
    },
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path)
        .map_err(|e| HarnessError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents)
        .map_err(|e| HarnessError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Resolves the effective config: profile defaults, then the config file,
/// then environment endpoints, then CLI flags.
fn resolve_config(flags: &ConfigFlags) -> Result<EngineConfig, HarnessError> {
    let mut config = match &flags.config {
        Some(path) => ConfigOverlay::from_json(&read_file(path)?)?.resolve(None)?,
        None => EngineConfig::default(),
    };
    if let Ok(endpoint) = std::env::var("MEMLINK_EMBED_ENDPOINT") {
        if !endpoint.is_empty() {
            config.embed_endpoint = Some(endpoint);
        }
    }
    if let Ok(endpoint) = std::env::var("MEMLINK_JUDGE_ENDPOINT") {
        if !endpoint.is_empty() {
            config.judge_endpoint = Some(endpoint);
        }
    }
    if let Some(k) = flags.k {
        config.k = k;
    }
    if let Some(tau1) = flags.tau1 {
        config.tau1 = tau1;
    }
    if let Some(tau2) = flags.tau2 {
        config.tau2 = tau2;
    }
    config.validate()?;
    Ok(config)
}

/// Prints a report to stdout and mirrors it to --out when given.
fn emit(report_json: &str, flags: &ConfigFlags) -> Result<(), HarnessError> {
    println!("{report_json}");
    if let Some(out) = &flags.out {
        write_file(out, report_json)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Ingest { history, flags } => {
            resolve_config(&flags)?;
            let loaded = load_history(&read_file(&history)?)?;
            eprintln!(
                "ingested {} sessions, {} messages",
                loaded.sessions().len(),
                loaded.message_count()
            );
            emit(&loaded.to_canonical_json(), &flags)
        }
        Command::Build { history, flags } => {
            let config = resolve_config(&flags)?;
            let providers = ProviderSet::from_config(&config)?;
            let loaded = load_history(&read_file(&history)?)?;
            let (index, report) = cmd_build(loaded, &providers, &config)?;
            let out = flags.out.clone().ok_or_else(|| {
                HarnessError::Input("build requires --out <snapshot path>".into())
            })?;
            write_file(&out, &index.to_snapshot_json())?;
            eprintln!(
                "built {} segments, {} links, {} entries -> {}",
                report.segments,
                report.links,
                report.entries,
                out.display()
            );
            println!("{}", to_report_json(&report));
            Ok(())
        }
        Command::Retrieve {
            snapshot,
            queries,
            flags,
        } => {
            let config = resolve_config(&flags)?;
            let providers = ProviderSet::from_config(&config)?;
            let index = MemoryIndex::from_snapshot_json(&read_file(&snapshot)?)?;
            let queries = QueryFile::from_json(&read_file(&queries)?)?;
            let report = cmd_retrieve(&index, providers.embedder.as_ref(), &queries, config.k)?;
            emit(&to_report_json(&report), &flags)
        }
        Command::Sweep {
            history,
            queries,
            tau1_list,
            tau2_list,
            flags,
        } => {
            let config = resolve_config(&flags)?;
            let providers = ProviderSet::from_config(&config)?;
            let loaded = load_history(&read_file(&history)?)?;
            let queries = QueryFile::from_json(&read_file(&queries)?)?;
            let tau1_list = if tau1_list.is_empty() { vec![config.tau1] } else { tau1_list };
            let tau2_list = if tau2_list.is_empty() { vec![config.tau2] } else { tau2_list };
            let report = cmd_sweep(&loaded, &queries, &tau1_list, &tau2_list, &providers, &config)?;
            emit(&to_report_json(&report), &flags)
        }
        Command::Reward {
            completions,
            candidates,
            gold,
            judge_mode,
            flags,
        } => {
            let config = resolve_config(&flags)?;
            let judge_mode: JudgeMode = judge_mode.parse()?;
            let completions = CompletionsFile::from_json(&read_file(&completions)?)?;
            let context = load_context(&read_file(&candidates)?)?;
            let gold = load_gold(&read_file(&gold)?)?;
            let report = cmd_reward(&completions, &context, &gold, judge_mode, &config)?;
            emit(&to_report_json(&report), &flags)
        }
        Command::Advantage {
            group,
            candidates,
            gold,
            judge_mode,
            flags,
        } => {
            let config = resolve_config(&flags)?;
            let judge_mode: JudgeMode = judge_mode.parse()?;
            let group = CompletionsFile::from_json(&read_file(&group)?)?;
            let loaded_context = match &candidates {
                Some(path) => Some(load_context(&read_file(path)?)?),
                None => None,
            };
            let loaded_gold = match &gold {
                Some(path) => Some(load_gold(&read_file(path)?)?),
                None => None,
            };
            let reward_inputs = match (&loaded_context, &loaded_gold) {
                (Some(context), Some(gold)) => Some((context, gold, judge_mode, &config)),
                _ => None,
            };
            let report = cmd_advantage(&group, reward_inputs, &config)?;
            emit(&to_report_json(&report), &flags)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; argument mistakes are
            // input errors (exit 1), keeping the documented code contract.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let started = Instant::now();
    match run(cli) {
        Ok(()) => {
            eprintln!("completed in {:.2}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
