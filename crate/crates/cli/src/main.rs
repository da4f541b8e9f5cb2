mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gameeval::Error;

/// Generate, solve, simulate and score evaluations of grid games.
#[derive(Debug, Parser)]
#[command(name = "gameeval", version)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root of the results store.
    #[arg(long, global = true, env = "GAMEEVAL_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a corpus of game specs.
    CorpusGen(CorpusGenArgs),
    /// Compute game-theoretic payoffs for a corpus.
    Solve(SolveArgs),
    /// Estimate payoffs by agent self-play.
    Simulate(SimulateArgs),
    /// Collect judgments from a language model.
    LlmRun(LlmRunArgs),
    /// Label the reasoning traces of an LLM run.
    CodeTraces(CodeTracesArgs),
    /// Score one judgment source against another.
    Compare(CompareArgs),
    /// Summary tables for a run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CorpusGenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Games sampled per category, on top of the example games.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only the example game of each category plus Tic-Tac-Toe.
    #[arg(long)]
    pub examples_only: bool,
    /// Restrict sampling to these category labels.
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Node budget for the exact search; accepts forms like 5e7.
    #[arg(long, value_parser = parse_count)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub exact_max_cells: Option<u64>,
    #[arg(long)]
    pub mcts_iterations: Option<u32>,
    /// Leave games without an exact result unsolved.
    #[arg(long)]
    pub no_mcts: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to solutions.jsonl in the data directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgentArg {
    Random,
    Intuitive,
    Expert,
    Mcts,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub p1: AgentArg,
    /// Defaults to the first player's agent.
    #[arg(long, value_enum)]
    pub p2: Option<AgentArg>,
    #[arg(long)]
    pub n_games: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the agent name, or `<p1>-vs-<p2>`.
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueryArg {
    Payoff,
    Funness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Direct,
    Cot,
    Reasoning,
}

#[derive(Debug, Args)]
pub struct LlmRunArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "payoff")]
    pub query: QueryArg,
    #[arg(long)]
    pub provider_id: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub prompt_mode: Option<ModeArg>,
    #[arg(long)]
    pub rollouts: Option<u32>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to `<model>-<mode>-<query>`.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Print the prompts and the number of calls without sending anything.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct CodeTracesArgs {
    #[arg(long)]
    pub run: String,
    /// Subset of labels; all eight by default.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    R2,
    Accuracy,
    Dev,
    Wasserstein,
    Splithalf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Candidate source: a run id, `human` or `optimal`.
    #[arg(long)]
    pub a: String,
    /// Reference source: `human`, `optimal` or a run id. Not used by splithalf.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// Human judgments CSV, needed when a source is `human`.
    #[arg(long)]
    pub human: Option<PathBuf>,
    /// Solve output, needed when a source is `optimal`.
    #[arg(long)]
    pub solutions: Option<PathBuf>,
    /// Defaults to the corpus recorded in the run manifest.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Needed when neither source is a run.
    #[arg(long, value_enum)]
    pub query: Option<QueryArg>,
    /// Adds one row per game category.
    #[arg(long)]
    pub by_category: bool,
    #[arg(long)]
    pub n_boot: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Traits,
    Category,
    Game,
    Model,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run: String,
    /// Reasoning-token summary instead of judgments.
    #[arg(long, conflicts_with = "codes")]
    pub tokens: bool,
    /// Trace-code rates from `code-traces`.
    #[arg(long)]
    pub codes: bool,
    #[arg(long, value_enum, default_value = "category")]
    pub group_by: GroupArg,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("{s:?} is not a non-negative whole number")),
    }
}

pub static CANCEL: AtomicBool = AtomicBool::new(false);

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Json(_) | Error::Game(_) | Error::UndefinedMetric(_) => 3,
        Error::Provider(_) => 4,
        Error::Interrupted => 130,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let handler = ctrlc::set_handler(|| {
        if CANCEL.swap(true, Ordering::SeqCst) {
            std::process::exit(130);
        }
        eprintln!("interrupt: finishing tasks in flight; press Ctrl-C again to stop now");
    });
    if let Err(e) = handler {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("5e7"), Ok(50_000_000));
        assert_eq!(parse_count("1000"), Ok(1000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
