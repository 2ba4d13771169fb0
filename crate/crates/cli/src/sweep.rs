//! Parameter sweeps.
//!
//! An axis is a comma-separated list of groups; each group is one or more
//! `+`-joined dotted key paths that receive the same value. A sweep value
//! has one `:`-separated component per group, so
//! `observer.iota_s+observer.iota_v,observer.gamma_s+observer.gamma_v`
//! swept over `2:1,1:2` ties the two thresholds and the two rates.
//! Path segments may be array indexes (`followers.0.sigma`) or `*` for every
//! element (`followers.*.sigma`).

use std::fmt::Write as _;
use std::path::Path;

use petreg::sim::{compute_metrics, Metrics};
use petreg::{run_scenario, ScenarioDocument};
use rayon::prelude::*;
use serde::Serialize;

use crate::{ensure_dir, to_json, write_file, CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub groups: Vec<Vec<String>>,
}

impl Axis {
    fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.join("+")).collect()
    }
}

pub fn parse_axis(text: &str) -> Result<Axis> {
    let mut groups = Vec::new();
    for group in text.split(',') {
        let paths: Vec<String> = group.split('+').map(|p| p.trim().to_string()).collect();
        if let Some(bad) = paths
            .iter()
            .find(|p| p.is_empty() || p.split('.').any(str::is_empty))
        {
            return Err(CliError::UnknownAxis(if bad.is_empty() {
                text.to_string()
            } else {
                bad.clone()
            }));
        }
        groups.push(paths);
    }
    Ok(Axis { groups })
}

/// Splits a value list into per-row tuples with `arity` components each.
pub fn parse_values(list: &str, arity: usize) -> Result<Vec<Vec<String>>> {
    let rows: Vec<Vec<String>> = list
        .split(',')
        .map(|v| v.split(':').map(|c| c.trim().to_string()).collect())
        .collect();
    for row in &rows {
        if row.len() != arity || row.iter().any(String::is_empty) {
            return Err(CliError::BadValues(format!(
                "`{}` needs {arity} component(s)",
                row.join(":")
            )));
        }
    }
    Ok(rows)
}

fn set_leaf(node: &mut toml::Value, raw: &str, path: &str) -> Result<()> {
    let bad = |what: &str| CliError::BadValues(format!("`{raw}` is not {what} for `{path}`"));
    *node = match node {
        toml::Value::Float(_) => toml::Value::Float(raw.parse().map_err(|_| bad("a number"))?),
        toml::Value::Integer(_) => {
            toml::Value::Integer(raw.parse().map_err(|_| bad("an integer"))?)
        }
        toml::Value::Boolean(_) => toml::Value::Boolean(raw.parse().map_err(|_| bad("a boolean"))?),
        toml::Value::String(_) => toml::Value::String(raw.to_string()),
        _ => return Err(CliError::UnknownAxis(path.to_string())),
    };
    Ok(())
}

fn set_path(node: &mut toml::Value, segs: &[&str], raw: &str, path: &str) -> Result<()> {
    let Some((&head, rest)) = segs.split_first() else {
        return set_leaf(node, raw, path);
    };
    let unknown = || CliError::UnknownAxis(path.to_string());
    match node {
        toml::Value::Array(items) if head == "*" => {
            if items.is_empty() {
                return Err(unknown());
            }
            items
                .iter_mut()
                .try_for_each(|item| set_path(item, rest, raw, path))
        }
        toml::Value::Array(items) => {
            let i: usize = head.parse().map_err(|_| unknown())?;
            set_path(items.get_mut(i).ok_or_else(unknown)?, rest, raw, path)
        }
        toml::Value::Table(t) => set_path(t.get_mut(head).ok_or_else(unknown)?, rest, raw, path),
        _ => Err(unknown()),
    }
}

/// Returns a copy of `doc` with every path of group `g` set to `values[g]`.
pub fn apply_axis(
    doc: &ScenarioDocument,
    axis: &Axis,
    values: &[String],
) -> Result<ScenarioDocument> {
    let text = doc.to_toml()?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Serialize {
        what: "scenario",
        message: e.to_string(),
    })?;
    let mut root = toml::Value::Table(table);
    for (paths, raw) in axis.groups.iter().zip(values) {
        for path in paths {
            let segs: Vec<&str> = path.split('.').collect();
            set_path(&mut root, &segs, raw, path)?;
        }
    }
    let text = toml::to_string(&root).map_err(|e| CliError::Serialize {
        what: "scenario",
        message: e.to_string(),
    })?;
    Ok(ScenarioDocument::from_toml(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub values: Vec<String>,
    pub metrics: Option<Metrics>,
    /// Set when the run failed, e.g. diverged.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: Vec<String>,
    pub rows: Vec<SweepRow>,
}

fn gap(g: Option<f64>) -> String {
    g.map_or_else(String::new, |g| format!("{g:.6e}"))
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.axis.join(",");
        out.push_str(
            ",tail_error,petm_a,petm_b,petm_c,min_gap_a,min_gap_b,min_gap_c,petm_a_edges,status\n",
        );
        for row in &self.rows {
            out.push_str(&row.values.join(","));
            match (&row.metrics, &row.error) {
                (Some(m), _) => {
                    let edges: Vec<String> = m
                        .petm_a_edges
                        .iter()
                        .map(|e| format!("{}>{}:{}", e.from, e.to, e.count))
                        .collect();
                    let _ = writeln!(
                        out,
                        ",{:.11e},{},{},{},{},{},{},{},ok",
                        m.tail_error,
                        m.petm_a.count,
                        m.petm_b.count,
                        m.petm_c.count,
                        gap(m.petm_a.min_gap),
                        gap(m.petm_b.min_gap),
                        gap(m.petm_c.min_gap),
                        edges.join(" ")
                    );
                }
                (None, err) => {
                    let msg = err.as_deref().unwrap_or("failed").replace([',', '\n'], ";");
                    let _ = writeln!(out, ",,,,,,,,,{msg}");
                }
            }
        }
        out
    }
}

/// Runs one scenario per value tuple, in parallel, keeping the input order.
/// Writes `sweep.csv` and `sweep.json` into `out_dir`.
pub fn cmd_sweep(
    doc: &ScenarioDocument,
    axis: &Axis,
    values: &[Vec<String>],
    out_dir: &Path,
) -> Result<SweepTable> {
    let docs = values
        .iter()
        .map(|v| apply_axis(doc, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let rows = docs
        .par_iter()
        .zip(values.par_iter())
        .map(|(d, v)| {
            let result = d
                .build()
                .and_then(|sc| run_scenario(&sc))
                .and_then(|(traj, log)| compute_metrics(&traj, &log, d.sim.tail_window));
            match result {
                Ok(m) => SweepRow {
                    values: v.clone(),
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => SweepRow {
                    values: v.clone(),
                    metrics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let table = SweepTable {
        axis: axis.labels(),
        rows,
    };
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("sweep.csv"), table.to_csv().as_bytes())?;
    write_file(&out_dir.join("sweep.json"), &to_json("sweep", &table)?)?;
    Ok(table)
}
