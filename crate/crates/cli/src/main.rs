//! `heatlab` — scenario-driven laboratory for Ricci-flow heat kernels.
//!
//! Verbs: `run` (full pipeline), `flow` / `kernel` / `check` / `limit`
//! (single stages), `report` (summary table over an output directory).
//! Exit codes: 0 all non-control checks pass, 1 check failure or runtime
//! error, 2 usage or scenario-parse error. `HEATLAB_THREADS` caps the
//! worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod pipeline;
mod scenario;
mod table;

use pipeline::{CheckOutcome, Pipeline, PipelineError};
use scenario::{Scenario, ScenarioError};
use table::TableError;

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Ricci-flow heat-kernel laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario end to end: flow, kernels, checks, limit.
    Run(StageArgs),
    /// Build the model trajectory and write its snapshots.
    Flow(StageArgs),
    /// Build the scenario's kernel fields and write them.
    Kernel(StageArgs),
    /// Run the scenario's checks and write one report per check.
    Check(StageArgs),
    /// Run the backward-limit experiment and write its report.
    Limit(StageArgs),
    /// Summarize the check reports in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Scenario file (positional alternative to --scenario).
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario")]
    scenario_pos: Option<PathBuf>,
    /// Scenario file.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Output directory (overrides the scenario's out_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed for trial corpora (overrides the scenario's seed).
    #[arg(long)]
    seed: Option<u64>,
}

impl StageArgs {
    fn scenario_path(&self) -> Result<PathBuf, AppError> {
        self.scenario
            .clone()
            .or_else(|| self.scenario_pos.clone())
            .ok_or_else(|| AppError::Usage("a scenario file is required".into()))
    }

    fn pipeline(&self) -> Result<Pipeline, AppError> {
        let sc = Scenario::load(&self.scenario_path()?)?;
        Ok(Pipeline::new(sc, self.out.clone(), self.seed))
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory to summarize (positional alternative to --out).
    #[arg(value_name = "DIR", conflicts_with = "out")]
    dir_pos: Option<PathBuf>,
    /// Output directory to summarize.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Table encoding.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl AppError {
    fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Usage(_) | AppError::Scenario(_) => ExitCode::from(2),
            AppError::Pipeline(PipelineError::MissingSection { .. }) => ExitCode::from(2),
            AppError::Pipeline(_) | AppError::Table(_) => ExitCode::from(1),
        }
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("HEATLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(k) if k >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("heatlab: ignoring invalid HEATLAB_THREADS={v:?}"),
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("heatlab: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, AppError> {
    match cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Flow(args) => cmd_flow(args),
        Cmd::Kernel(args) => cmd_kernel(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Limit(args) => cmd_limit(args),
        Cmd::Report(args) => cmd_report(args),
    }
}

fn print_outcome(outcome: &CheckOutcome) {
    let tag = if outcome.control { " [control]" } else { "" };
    println!("check{tag}: {}", outcome.report);
}

/// Prints the verdict summary and returns the exit code for the outcomes.
fn conclude(outcomes: &[CheckOutcome]) -> ExitCode {
    let failing: Vec<&CheckOutcome> = outcomes
        .iter()
        .filter(|o| o.blocking_failure())
        .collect();
    if failing.is_empty() {
        println!("result: pass");
        ExitCode::SUCCESS
    } else {
        println!("result: FAIL ({} check(s) failed)", failing.len());
        println!("failing reports:");
        for o in &failing {
            println!("  {}", o.path.display());
        }
        ExitCode::from(1)
    }
}

fn cmd_run(args: StageArgs) -> Result<ExitCode, AppError> {
    let pipe = args.pipeline()?;
    println!("scenario: {} (seed {})", pipe.scenario.name, pipe.seed);

    let tr = pipe.build_trajectory()?;
    let dir = pipe.write_trajectory(&tr)?;
    println!(
        "flow: {} snapshots -> {}",
        tr.profiles.len(),
        dir.display()
    );

    let kernels = pipe.stage_kernels(&tr)?;
    for (name, (kf, dir)) in &kernels {
        println!(
            "kernel {name}: {} slices -> {}",
            kf.num_times(),
            dir.display()
        );
    }

    let mut outcomes = pipe.stage_checks(&tr, &kernels)?;
    for outcome in &outcomes {
        print_outcome(outcome);
    }

    if pipe.scenario.limit.is_some() {
        let (lim, outcome) = pipe.stage_limit(&tr)?;
        let tag = if outcome.control { " [control]" } else { "" };
        println!(
            "limit{tag}: verdict {}, nonflat = {} -> {}",
            lim.verdict,
            lim.nonflat,
            pipe.reports_dir().join("limit_report.json").display()
        );
        for note in &lim.notes {
            println!("  note: {note}");
        }
        outcomes.push(outcome);
    }

    Ok(conclude(&outcomes))
}

fn cmd_flow(args: StageArgs) -> Result<ExitCode, AppError> {
    let pipe = args.pipeline()?;
    let tr = pipe.build_trajectory()?;
    let dir = pipe.write_trajectory(&tr)?;
    println!(
        "flow: {} snapshots -> {}",
        tr.profiles.len(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_kernel(args: StageArgs) -> Result<ExitCode, AppError> {
    let pipe = args.pipeline()?;
    let tr = pipe.build_trajectory()?;
    let kernels = pipe.stage_kernels(&tr)?;
    for (name, (kf, dir)) in &kernels {
        println!(
            "kernel {name}: {} slices -> {}",
            kf.num_times(),
            dir.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: StageArgs) -> Result<ExitCode, AppError> {
    let pipe = args.pipeline()?;
    let tr = pipe.build_trajectory()?;
    let kernels = pipe.stage_kernels(&tr)?;
    let outcomes = pipe.stage_checks(&tr, &kernels)?;
    for outcome in &outcomes {
        print_outcome(outcome);
    }
    Ok(conclude(&outcomes))
}

fn cmd_limit(args: StageArgs) -> Result<ExitCode, AppError> {
    let pipe = args.pipeline()?;
    let tr = pipe.build_trajectory()?;
    let (lim, outcome) = pipe.stage_limit(&tr)?;
    let tag = if outcome.control { " [control]" } else { "" };
    println!(
        "limit{tag}: verdict {}, nonflat = {} -> {}",
        lim.verdict,
        lim.nonflat,
        pipe.reports_dir().join("limit_report.json").display()
    );
    for note in &lim.notes {
        println!("  note: {note}");
    }
    Ok(conclude(&[outcome]))
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, AppError> {
    let dir = args
        .out
        .clone()
        .or_else(|| args.dir_pos.clone())
        .ok_or_else(|| AppError::Usage("an output directory is required".into()))?;
    let rows = table::collect_rows(&dir)?;
    let rendered = match args.format {
        Format::Csv => table::to_csv(&rows),
        Format::Json => table::to_json(&rows),
    };
    print!("{rendered}");
    Ok(ExitCode::SUCCESS)
}
