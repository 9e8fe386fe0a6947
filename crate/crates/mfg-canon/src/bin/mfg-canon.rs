//! Command-line front end: certify, check, solve and equivalence workflows
//! over JSON problem files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfg_canon::cli::{run_workflow, Workflow, WorkflowOutput};
use mfg_canon::error::Error;

#[derive(Parser)]
#[command(name = "mfg-canon", version, about = "Canonical momentum-shift toolkit for mean field games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Shift parameter for equivalence and alpha-displacement checks.
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed overriding the problem file's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory table destination (solve); defaults to `<out>.traj.tsv`.
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate closed-form well-posedness certificates.
    Certify(CommonArgs),
    /// Run sampled monotonicity checks.
    Check(CommonArgs),
    /// Solve the N-particle forward-backward system.
    Solve(CommonArgs),
    /// Verify the momentum-shift solution correspondence numerically.
    Equivalence(CommonArgs),
}

fn run(workflow: Workflow, args: &CommonArgs) -> Result<WorkflowOutput, Error> {
    let text = std::fs::read_to_string(&args.problem)?;
    run_workflow(workflow, &text, args.alpha, args.seed)
}

fn emit(args: &CommonArgs, output: &WorkflowOutput) -> Result<(), Error> {
    let report_json = output.report.to_json()?;
    match &args.out {
        Some(path) => std::fs::write(path, report_json + "\n")?,
        None => println!("{report_json}"),
    }
    if let Some(table) = &output.trajectory_table {
        let table_path = args.traj.clone().or_else(|| {
            args.out.as_ref().map(|o| {
                let mut p = o.clone().into_os_string();
                p.push(".traj.tsv");
                PathBuf::from(p)
            })
        });
        if let Some(path) = table_path {
            std::fs::write(path, table)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (workflow, args) = match &cli.command {
        Command::Certify(a) => (Workflow::Certify, a),
        Command::Check(a) => (Workflow::Check, a),
        Command::Solve(a) => (Workflow::Solve, a),
        Command::Equivalence(a) => (Workflow::Equivalence, a),
    };
    match run(workflow, args) {
        Ok(output) => {
            if let Err(e) = emit(args, &output) {
                eprintln!("mfg-canon: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            ExitCode::from(output.exit_code as u8)
        }
        Err(e) => {
            eprintln!("mfg-canon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
