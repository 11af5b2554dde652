//! `mbg`: corpus generation, analysis, training, synthesis and evaluation
//! for closed-loop excitation vocoder experiments.

mod config;
mod error;
mod layout;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbg_core::vocoder::TrainMode;

use config::ExperimentConfig;
use error::{CliError, CliResult};
use layout::Layout;

#[derive(Parser)]
#[command(name = "mbg", version, about = "Closed-loop excitation vocoder experiments")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for this stage, overriding the matching `[seeds]` entry
    /// (`surrogate.seed` for analyze).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic corpus (WAVs and manifest).
    CorpusGen,
    /// Build the feature container from the manifest.
    Analyze,
    /// Train one excitation model.
    Train {
        /// plain, g, mbg or mbg_star.
        #[arg(long)]
        mode: String,
        /// Plain checkpoint to start from (mbg_star only).
        #[arg(long)]
        parent: Option<PathBuf>,
    },
    /// Synthesize one utterance with a trained system.
    Synthesize {
        #[arg(long)]
        system: String,
        #[arg(long)]
        utt: String,
    },
    /// Score every available system on the test split.
    Evaluate,
    /// Collect NLL curves and evaluation tables.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CorpusGen => "corpus-gen",
            Command::Analyze => "analyze",
            Command::Train { .. } => "train",
            Command::Synthesize { .. } => "synthesize",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
        }
    }
}

fn parse_mode(s: &str) -> CliResult<TrainMode> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("unknown mode `{s}`; expected plain, g, mbg or mbg_star")))
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("MBG_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(vec![format!("MBG_THREADS must be a positive integer, got `{value}`")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match (&cli.command, cli.seed) {
        (Command::CorpusGen, Some(s)) => cfg.seeds.corpus = s,
        (Command::Analyze, Some(s)) => cfg.surrogate.seed = s,
        (Command::Train { .. }, Some(s)) => cfg.seeds.train = s,
        (Command::Synthesize { .. } | Command::Evaluate, Some(s)) => cfg.seeds.eval = s,
        _ => {}
    }
    cfg.validate()?;
    let out = Layout::new(&cfg.output_dir);
    match &cli.command {
        Command::CorpusGen => stages::corpus_gen(&cfg, &out, cfg.seeds.corpus),
        Command::Analyze => stages::analyze(&cfg, &out),
        Command::Train { mode, parent } => {
            stages::train_stage(&cfg, &out, parse_mode(mode)?, parent.as_deref(), cfg.seeds.train)
        }
        Command::Synthesize { system, utt } => {
            stages::synthesize_stage(&cfg, &out, parse_mode(system)?, utt, cfg.seeds.eval).map(|_| ())
        }
        Command::Evaluate => stages::evaluate(&cfg, &out, cfg.seeds.eval),
        Command::Report => stages::report(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.kind().to_string());
            eprint!("{e}");
            eprintln!("{}", err.error_line("args"));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.error_line(cli.command.name()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
