mod analyze;
mod corpus;
mod eval;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parlvote_core::gateway::TaskKind;
use tracing_subscriber::EnvFilter;

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  validation or data failure (invalid corpus, corrupt store)
  2  usage or environment failure (missing files, bad flags, unreadable config)

Logs go to standard error; set PARLVOTE_LOG (e.g. debug) to change the level.";

#[derive(Debug, Parser)]
#[command(name = "parlvote", version, about = "Roll-call corpus tools, LLM prediction sweeps and bias reports", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read raw record files, validate them and write a normalised corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a corpus; prints one violation per line.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Run a prediction sweep over every eligible speech and model.
    Eval(eval::EvalArgs),
    /// Write the analysis CSVs for a prediction store.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = parlvote_core::analysis::DEFAULT_CONFIDENCE_THRESHOLD)]
        threshold: u8,
        /// Stereotype lexicon TSV (term, gender, variants).
        #[arg(long)]
        stereotypes: Option<PathBuf>,
        /// Topic lexicon TSV.
        #[arg(long)]
        topics: Option<PathBuf>,
        /// Failure ruleset TOML.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

/// A failed command, carrying its exit code class.
#[derive(Debug)]
pub enum Failure {
    Data(String),
    Env(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Env(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Data(m) | Failure::Env(m) => m,
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_env("PARLVOTE_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { input, out } => corpus::ingest(&input, &out),
        Command::Validate { corpus } => corpus::validate(&corpus),
        Command::Eval(args) => runtime().and_then(|rt| rt.block_on(eval::run(args))),
        Command::Analyze {
            store,
            report,
            threshold,
            stereotypes,
            topics,
            rules,
        } => analyze::run(analyze::AnalyzeArgs {
            store,
            report,
            threshold,
            stereotypes,
            topics,
            rules,
        }),
        Command::Serve { config } => runtime().and_then(|rt| rt.block_on(serve(config))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            tracing::error!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::Env(format!("cannot start runtime: {e}")))
}

async fn serve(config: PathBuf) -> Outcome {
    use parlvote_api::StartupError;
    use parlvote_core::corpus::LoadError;
    use parlvote_core::store::StoreError;

    let config = parlvote_api::ApiConfig::from_file(&config).map_err(|e| Failure::Env(e.to_string()))?;
    parlvote_api::serve(&config).await.map_err(|e| match e {
        StartupError::Corpus(LoadError::MissingFile(_) | LoadError::Io { .. })
        | StartupError::Store(StoreError::StorageFailure { .. }) => Failure::Env(e.to_string()),
        StartupError::Corpus(_) | StartupError::Store(_) => Failure::Data(e.to_string()),
        _ => Failure::Env(e.to_string()),
    })
}
