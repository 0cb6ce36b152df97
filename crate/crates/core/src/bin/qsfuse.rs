use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsfuse::pipeline::{describe_outcome, Pipeline, PipelineConfig, Stage};
use qsfuse::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_MISSING: u8 = 3;

#[derive(Parser)]
#[command(name = "qsfuse", version, about = "Smart-scale weigh-in tweets + social text: cleaning, prediction, trends")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory holding every stage's outputs.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Overrides the synth and cross-validation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic corpus with its ground truth.
    Synth,
    /// Read and classify corpus files.
    Ingest,
    /// Parse weigh-ins into series and flag implausible ones.
    Clean,
    /// Apply the population and individual inclusion rules.
    Cohort,
    /// Build lexicon and bag-of-words features.
    Features,
    /// Fit the configured models on the whole cohort.
    Train,
    /// Cross-validate every model on every feature set.
    Evaluate,
    /// Weekday and monthly aggregates, plus search-interest comparisons.
    Trends,
    /// Consolidated text and JSON report.
    Report,
    /// Every stage in dependency order.
    All,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Clean => Stage::Clean,
            Command::Cohort => Stage::Cohort,
            Command::Features => Stage::Features,
            Command::Train => Stage::Train,
            Command::Evaluate => Stage::Evaluate,
            Command::Trends => Stage::Trends,
            Command::Report => Stage::Report,
            Command::All => return None,
        })
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingStage { .. } => EXIT_MISSING,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> qsfuse::Result<u8> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let pipeline = Pipeline::new(config, &cli.out)?;
    let outcomes = match cli.command.stage() {
        Some(stage) => vec![pipeline.run(stage)?],
        None => pipeline.run_all()?,
    };
    let mut stdout = std::io::stdout().lock();
    let mut gaps = false;
    for o in &outcomes {
        let _ = describe_outcome(o, &mut stdout);
        gaps |= !o.gaps.is_empty();
    }
    if outcomes.iter().any(|o| o.stage == Stage::Report) {
        let text = std::fs::read_to_string(cli.out.join("report/report.txt")).map_err(|e| Error::Io {
            path: cli.out.join("report/report.txt"),
            source: e,
        })?;
        print!("{text}");
    }
    Ok(if gaps { EXIT_MISSING } else { 0 })
}
