//! `wildset`: the dataset-construction pipeline as subcommands.
//!
//! Exit status is 0 on success, 1 when the run fails (invalid config or
//! flags, unreadable or malformed inputs), and 2 for usage errors.

mod cmd;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::PipelineConfig;
use run::Run;

pub const THREADS_ENV: &str = "WILDSET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "wildset", version, about = "Near-duplicate detection, label preparation and schedule planning")]
struct Cli {
    /// Pipeline config (TOML). Flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads; defaults to $WILDSET_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Where to write the run manifest; defaults to `<first output>.manifest.json`.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pool feature maps into descriptors or encode them for storage.
    #[command(subcommand)]
    Descriptors(cmd::descriptors::DescriptorsCmd),
    /// Train PCA, scalar quantizer, rotation, coarse and residual codebooks.
    TrainQuantizers(cmd::index::TrainArgs),
    /// Build, extend or query an inverted index.
    #[command(subcommand)]
    Index(cmd::index::IndexCmd),
    /// Two-stage near-duplicate detection against an index.
    Dedup(cmd::dedup::DedupArgs),
    /// Merge hashtags with identical synset sets.
    Canonicalize(cmd::labels::CanonicalizeArgs),
    /// Select the hashtag vocabulary and relabel image records.
    Vocab(cmd::labels::VocabArgs),
    /// Materialise a resampled epoch list.
    Resample(cmd::sampling::ResampleArgs),
    /// Emit 1/k multi-label targets.
    Targets(cmd::labels::TargetsArgs),
    /// Replace a fraction of tags with draws from the tag marginal.
    Noise(cmd::sampling::NoiseArgs),
    /// Print a learning-rate schedule.
    Schedule(cmd::schedule::ScheduleArgs),
    /// Duplicate statistics and accuracy lower bounds from a verdict file.
    Report(cmd::report::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Descriptors(c) => c.name(),
            Command::TrainQuantizers(_) => "train-quantizers",
            Command::Index(c) => c.name(),
            Command::Dedup(_) => "dedup",
            Command::Canonicalize(_) => "canonicalize",
            Command::Vocab(_) => "vocab",
            Command::Resample(_) => "resample",
            Command::Targets(_) => "targets",
            Command::Noise(_) => "noise",
            Command::Schedule(_) => "schedule",
            Command::Report(_) => "report",
        }
    }
}

fn threads(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        if t == 0 {
            bail!("--threads: must be at least 1");
        }
        return Ok(Some(t));
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let t: usize = v.trim().parse().ok().filter(|&t| t > 0).with_context(|| {
            format!("{THREADS_ENV}: expected a positive integer, got {v:?}")
        })?;
        return Ok(Some(t));
    }
    Ok(config)
}

fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    config.validate()?;
    let threads = threads(cli.threads, config.threads)?;
    if let Some(t) = threads {
        wildset_core::par::init_threads(t);
    }
    let mut run = Run::new(cli.command.name(), argv, config, threads);
    if let Some(p) = &cli.config {
        run.input("--config", p)?;
    }
    match cli.command {
        Command::Descriptors(c) => cmd::descriptors::run(c, &mut run)?,
        Command::TrainQuantizers(a) => cmd::index::train(a, &mut run)?,
        Command::Index(c) => cmd::index::run(c, &mut run)?,
        Command::Dedup(a) => cmd::dedup::run(a, &mut run)?,
        Command::Canonicalize(a) => cmd::labels::canonicalize(a, &mut run)?,
        Command::Vocab(a) => cmd::labels::vocab(a, &mut run)?,
        Command::Resample(a) => cmd::sampling::resample(a, &mut run)?,
        Command::Targets(a) => cmd::labels::targets(a, &mut run)?,
        Command::Noise(a) => cmd::sampling::noise(a, &mut run)?,
        Command::Schedule(a) => cmd::schedule::run(a, &mut run)?,
        Command::Report(a) => cmd::report::run(a, &mut run)?,
    }
    if let Some(p) = run.finish(cli.manifest.as_deref())? {
        log::info!("manifest written to {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
