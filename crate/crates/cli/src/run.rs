use std::io::BufWriter;
use std::path::Path;

use petreg::sim::{compute_metrics, write_events_csv, write_trajectory_csv, Metrics};
use petreg::{run_scenario, ScenarioDocument};

use crate::bounds::{cmd_bounds, BoundsReport};
use crate::{ensure_dir, io_err, to_json, write_file, CliError, Result};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub metrics: Metrics,
    /// Bound violations let through by the override flag.
    pub warnings: Vec<String>,
}

/// Lists every configured period that is not strictly below its bound.
pub fn check_periods(report: &BoundsReport) -> Vec<String> {
    let mut out = Vec::new();
    if !report.comm_admissible {
        out.push(format!(
            "communication period {} s is not below the bound {:.6e} s",
            report.comm_period, report.comm_bound
        ));
    }
    for a in report.agents.iter().filter(|a| !a.admissible) {
        match a.sensor_bound {
            Some(b) => out.push(format!(
                "agent {} sensor period {} s is not below the bound {b:.6e} s",
                a.agent, a.sensor_period
            )),
            None => out.push(format!("agent {} has no admissible sensor period", a.agent)),
        }
    }
    out
}

fn write_csv(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err(path))?;
    std::io::Write::flush(&mut w).map_err(io_err(path))
}

/// Runs one scenario and writes `trajectory.csv`, `events.csv` and
/// `metrics.json` into `out_dir`. Bound-violating periods are refused
/// before simulating unless `override_bounds` is set.
pub fn cmd_run(
    doc: &ScenarioDocument,
    out_dir: &Path,
    override_bounds: bool,
) -> Result<RunSummary> {
    let sc = doc.build()?;
    let violations = check_periods(&cmd_bounds(doc)?);
    if !violations.is_empty() && !override_bounds {
        return Err(CliError::BoundViolation(violations.join("; ")));
    }
    let (traj, log) = run_scenario(&sc)?;
    let metrics = compute_metrics(&traj, &log, doc.sim.tail_window)?;

    ensure_dir(out_dir)?;
    write_csv(&out_dir.join("trajectory.csv"), |w| {
        write_trajectory_csv(&traj, w)
    })?;
    write_csv(&out_dir.join("events.csv"), |w| write_events_csv(&log, w))?;
    write_file(
        &out_dir.join("metrics.json"),
        &to_json("metrics", &metrics)?,
    )?;
    Ok(RunSummary {
        metrics,
        warnings: violations,
    })
}
