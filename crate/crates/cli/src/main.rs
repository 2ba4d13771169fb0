use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use petreg_cli::{
    cmd_bounds, cmd_run, cmd_sweep, load_document, parse_axis, parse_values, CliError,
};

#[derive(Parser)]
#[command(
    name = "petreg",
    version,
    about = "Periodic event-triggered output regulation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report admissible periods and steady-state error bounds.
    Bounds { doc: PathBuf },
    /// Simulate one scenario and write trajectory, events and metrics.
    Run {
        doc: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Simulate even if a configured period violates its bound.
        #[arg(long)]
        override_bounds: bool,
    },
    /// Run one scenario per value and tabulate the metrics.
    Sweep {
        doc: PathBuf,
        /// Comma-separated groups of `+`-joined key paths.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, `:` between group components.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Bounds { doc } => {
            let report = cmd_bounds(&load_document(&doc)?)?;
            print!("{report}");
            if !report.feasible() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Run {
            doc,
            out,
            override_bounds,
        } => {
            let d = load_document(&doc)?;
            let summary = cmd_run(&d, &out, override_bounds)
                .with_context(|| format!("running {}", doc.display()))?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            let m = &summary.metrics;
            println!("tail error: {:.6e}", m.tail_error);
            for (name, s) in [
                ("petm_a", &m.petm_a),
                ("petm_b", &m.petm_b),
                ("petm_c", &m.petm_c),
            ] {
                let gap = s.min_gap.map_or("-".to_string(), |g| format!("{g:.6e}"));
                println!("{name}: {} events, min gap {gap} s", s.count);
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            doc,
            axis,
            values,
            out,
        } => {
            let d = load_document(&doc)?;
            let axis = parse_axis(&axis)?;
            let values = parse_values(&values, axis.groups.len())?;
            let table = cmd_sweep(&d, &axis, &values, &out)?;
            print!("{}", table.to_csv());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
