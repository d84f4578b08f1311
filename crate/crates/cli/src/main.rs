//! `seqrec`: drives ingest, graph building, embedding, training,
//! evaluation and recommendation from one config file.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqrec_core::eval::SparsityLevel;

use config::{Overrides, RunConfig};

/// Bad input or configuration (exit code 1).
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser, Debug)]
#[command(name = "seqrec", version, about = "Sequential repository recommender")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sparsity level whose corpus and artifacts to use.
    #[arg(long, global = true, value_parser = parse_level)]
    level: Option<SparsityLevel>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and filter the corpus, then print its statistics.
    Ingest,
    /// Delete interactions for `--level`, keeping the per-user and
    /// per-repository minimums.
    Sparsify,
    /// Build the repository similarity graph.
    BuildGraph {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Learn repository embeddings from the graph.
    TrainSdne,
    /// Train the GRU recommender.
    TrainRec {
        #[arg(long)]
        window: Option<usize>,
    },
    /// Score the test split and write metrics.json.
    Evaluate {
        #[arg(long)]
        window: Option<usize>,
    },
    /// Print the top repositories for one user.
    Recommend {
        user: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long)]
        window: Option<usize>,
    },
}

fn parse_level(s: &str) -> Result<SparsityLevel, String> {
    s.parse().map_err(|e: seqrec_core::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut o = Overrides { seed: cli.seed, out: cli.out, level: cli.level, ..Default::default() };
    match &cli.command {
        Command::BuildGraph { epsilon } => o.epsilon = *epsilon,
        Command::TrainRec { window } | Command::Evaluate { window } | Command::Recommend { window, .. } => {
            o.window = *window
        }
        _ => {}
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &o)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Sparsify => commands::sparsify_cmd(&cfg),
        Command::BuildGraph { .. } => commands::build_graph(&cfg),
        Command::TrainSdne => commands::train_sdne(&cfg),
        Command::TrainRec { .. } => commands::train_rec(&cfg),
        Command::Evaluate { .. } => commands::evaluate_cmd(&cfg),
        Command::Recommend { user, top_n, .. } => commands::recommend(&cfg, &user, top_n),
    }
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Invalid>() || e.downcast_ref::<seqrec_core::Error>().is_some_and(seqrec_core::Error::is_validation)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
