//! `auditor` — audit NIDS dataset coverage against an ATT&CK-derived threat
//! model. Subcommands map to pipeline phases; `run` executes all of them.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 remote assessment
//! service unavailable (the run still completes with unassessed records).

use auditor_core::assess::AssessorKind;
use auditor_core::pipeline::{
    load_config, run_pipeline, stage_assess, stage_detect, stage_extract, stage_ingest,
    stage_report, stage_score, LoadedConfig, PipelineError,
};
use auditor_core::risk::RiskCombiner;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "auditor",
    version,
    about = "Audit NIDS dataset coverage of energy-sector adversary techniques"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured risk combiner (weighted|additive).
    #[arg(long)]
    risk_combiner: Option<RiskCombiner>,
    /// Override whether Partial-detectability techniques stay in scope.
    #[arg(long)]
    include_partial: Option<bool>,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: Common,
    /// Which assessor to run (rules|remote|both).
    #[arg(long)]
    assessor: Option<AssessorKind>,
    /// Override the dataset knowledge base file.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Override the techniques input file (map of id to technique record).
    #[arg(long)]
    techniques: Option<PathBuf>,
    /// Override the remote response cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every phase: ingest, extract, score, detect, assess, report.
    Run(Common),
    /// Parse and merge the ATT&CK bundles.
    Ingest(Common),
    /// Build the threat model from the merged graph.
    Extract(Common),
    /// Score and rank threat-model techniques.
    Score(Common),
    /// Classify detectability and select the assessment scope.
    Detect(Common),
    /// Assess dataset coverage with the configured assessors.
    Assess(AssessArgs),
    /// Assemble analytics and write the report set.
    Report(Common),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_REMOTE: u8 = 3;

fn load(common: &Common) -> Result<LoadedConfig, PipelineError> {
    let mut loaded = load_config(&common.config)?;
    if let Some(combiner) = common.risk_combiner {
        loaded.config.risk_combiner = combiner;
    }
    if let Some(include_partial) = common.include_partial {
        loaded.config.include_partial = include_partial;
    }
    Ok(loaded)
}

fn apply_assess_overrides(
    loaded: &mut LoadedConfig,
    args: &AssessArgs,
) -> Result<(), PipelineError> {
    if let Some(assessor) = args.assessor {
        loaded.config.assessor = assessor;
    }
    if let Some(kb) = &args.kb {
        loaded.config.datasets = kb.clone();
    }
    if let Some(techniques) = &args.techniques {
        loaded.config.techniques = Some(techniques.clone());
    }
    if let Some(cache) = &args.cache {
        match loaded.config.remote.as_mut() {
            Some(remote) => remote.cache_dir = cache.clone(),
            None => log::warn!("--cache given but no remote service is configured; ignored"),
        }
    }
    if matches!(
        loaded.config.assessor,
        AssessorKind::Remote | AssessorKind::Both
    ) && loaded.config.remote.is_none()
    {
        return Err(PipelineError {
            phase: "config",
            message: "assessor requires a remote service but no `remote` section is configured"
                .to_string(),
        });
    }
    Ok(())
}

fn remote_unavailable_exit() -> ExitCode {
    eprintln!(
        "error: [assess] remote assessment service unavailable; affected techniques recorded as unassessed"
    );
    ExitCode::from(EXIT_REMOTE)
}

fn dispatch(command: Command) -> Result<ExitCode, PipelineError> {
    match command {
        Command::Run(common) => {
            let loaded = load(&common)?;
            let outcome = run_pipeline(&loaded)?;
            println!("report written to {}", loaded.config.out_dir.display());
            if outcome.remote_unavailable {
                return Ok(remote_unavailable_exit());
            }
        }
        Command::Ingest(common) => {
            let loaded = load(&common)?;
            stage_ingest(&loaded)?;
            println!("graph written to {}", loaded.config.out_dir.display());
        }
        Command::Extract(common) => {
            let loaded = load(&common)?;
            stage_extract(&loaded)?;
            println!(
                "threat model written to {}",
                loaded.config.out_dir.display()
            );
        }
        Command::Score(common) => {
            let loaded = load(&common)?;
            stage_score(&loaded)?;
            println!(
                "risk profiles written to {}",
                loaded.config.out_dir.display()
            );
        }
        Command::Detect(common) => {
            let loaded = load(&common)?;
            stage_detect(&loaded)?;
            println!(
                "detectability written to {}",
                loaded.config.out_dir.display()
            );
        }
        Command::Assess(args) => {
            let mut loaded = load(&args.common)?;
            apply_assess_overrides(&mut loaded, &args)?;
            let outcome = stage_assess(&loaded)?;
            println!("assessments written to {}", loaded.config.out_dir.display());
            if outcome.remote_unavailable {
                return Ok(remote_unavailable_exit());
            }
        }
        Command::Report(common) => {
            let loaded = load(&common)?;
            stage_report(&loaded)?;
            println!("report written to {}", loaded.config.out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = err.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
