//! TOML scenario documents.
//!
//! A document collects the graph, leader, followers, trigger parameters,
//! simulation grid and bound parameters. Agents are numbered from 1 in the
//! document and matrices are written row by row.

use serde::{Deserialize, Serialize};

use crate::controller::{BoundParams, ControllerGains, TriggerConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matops::{Matrix, Vector};
use crate::observer::{CombineMode, PetmAConfig};
use crate::plant::{FollowerModel, LeaderModel};
use crate::sim::{FollowerSetup, ObserverConfig, Scenario, SimConfig};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub graph: GraphSection,
    pub leader: LeaderSection,
    pub followers: Vec<FollowerSection>,
    pub observer: ObserverSection,
    pub controller: ControllerSection,
    pub sim: SimSection,
    pub bound_params: BoundParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub followers: usize,
    /// `[from, to]` pairs.
    pub edges: Vec<[usize; 2]>,
    /// Followers that receive the leader directly.
    pub pinned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    pub s: Rows,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerSection {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub d: Rows,
    pub e: Rows,
    pub f: Rows,
    pub c_m: Rows,
    pub d_m: Rows,
    pub f_m: Rows,
    pub x0: Vec<f64>,
    pub k: Rows,
    pub l: Rows,
    pub sigma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub mu1: f64,
    pub mu2: f64,
    pub iota_s: f64,
    pub gamma_s: f64,
    pub iota_v: f64,
    pub gamma_v: f64,
    #[serde(default)]
    pub combine_mode: CombineMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub iota_psi: f64,
    pub gamma_psi: f64,
    #[serde(default)]
    pub iota_psi_bar: f64,
    pub iota_omega: f64,
    pub gamma_omega: f64,
    #[serde(default)]
    pub iota_omega_bar: f64,
    pub petm_c: bool,
    #[serde(default)]
    pub variant_e: bool,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub comm_period: f64,
    pub sensor_periods: Vec<f64>,
    #[serde(default)]
    pub sensor_phases: Option<Vec<f64>>,
    pub t_end: f64,
    pub substeps: usize,
    /// Window, in seconds, for the tail regulation error.
    pub tail_window: f64,
}

fn schema(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Re-labels any error raised while building a section with its key path.
fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema { .. } => e,
        other => schema(path, other),
    })
}

fn matrix(path: &str, rows: &Rows) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(schema(path, "matrix must be non-empty"));
    }
    if let Some(bad) = rows.iter().position(|row| row.len() != c) {
        return Err(schema(
            format!("{path}[{bad}]"),
            format!("row has {} entries, expected {c}", rows[bad].len()),
        ));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(schema(path, "entries must be finite"));
    }
    Ok(Matrix::from_row_iterator(
        r,
        c,
        rows.iter().flatten().copied(),
    ))
}

impl ScenarioDocument {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| schema("", e.message()))?;
        let doc: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner().message())
        })?;
        doc.build()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("serializing scenario: {e}")))
    }

    fn sensor_phases(&self) -> Vec<f64> {
        self.sim
            .sensor_phases
            .clone()
            .unwrap_or_else(|| vec![0.0; self.followers.len()])
    }

    /// Trigger configuration of follower `i` (0-based).
    pub fn trigger(&self, i: usize) -> TriggerConfig {
        let c = &self.controller;
        TriggerConfig {
            iota_psi: c.iota_psi,
            gamma_psi: c.gamma_psi,
            iota_psi_bar: c.iota_psi_bar,
            iota_omega: c.iota_omega,
            gamma_omega: c.gamma_omega,
            iota_omega_bar: c.iota_omega_bar,
            sigma: self.followers[i].sigma,
            rho: self.followers[i].rho,
            petm_c_enabled: c.petm_c,
            variant_e: c.variant_e,
        }
    }

    /// Validates every section and assembles a runnable scenario.
    pub fn build(&self) -> Result<Scenario> {
        let n = self.graph.followers;
        if n == 0 {
            return Err(schema(
                "graph.followers",
                "at least one follower is required",
            ));
        }
        if self.followers.len() != n {
            return Err(schema(
                "followers",
                format!("{} entries for {n} followers", self.followers.len()),
            ));
        }
        for (k, &[from, to]) in self.graph.edges.iter().enumerate() {
            if from == 0 || to == 0 || from > n || to > n {
                return Err(schema(
                    format!("graph.edges[{k}]"),
                    format!("agents are numbered 1..={n}"),
                ));
            }
        }
        if let Some(k) = self.graph.pinned.iter().position(|&p| p == 0 || p > n) {
            return Err(schema(
                format!("graph.pinned[{k}]"),
                format!("agents are numbered 1..={n}"),
            ));
        }
        let edges: Vec<(usize, usize)> = self
            .graph
            .edges
            .iter()
            .map(|&[a, b]| (a - 1, b - 1))
            .collect();
        let pinned: Vec<usize> = self.graph.pinned.iter().map(|p| p - 1).collect();
        let graph = at("graph", Graph::new(n, &edges, &pinned))?;

        let leader = at(
            "leader",
            LeaderModel::new(
                matrix("leader.s", &self.leader.s)?,
                Vector::from_vec(self.leader.v0.clone()),
            ),
        )?;

        let mut followers = Vec::with_capacity(n);
        for (i, f) in self.followers.iter().enumerate() {
            let p = format!("followers[{i}]");
            let m = |name: &str, rows: &Rows| matrix(&format!("{p}.{name}"), rows);
            let model = at(
                &p,
                FollowerModel::new(
                    m("a", &f.a)?,
                    m("b", &f.b)?,
                    m("c", &f.c)?,
                    m("d", &f.d)?,
                    m("e", &f.e)?,
                    m("f", &f.f)?,
                    m("c_m", &f.c_m)?,
                    m("d_m", &f.d_m)?,
                    m("f_m", &f.f_m)?,
                    Vector::from_vec(f.x0.clone()),
                ),
            )?;
            if model.n_leader() != leader.dim() {
                return Err(schema(
                    format!("{p}.e"),
                    format!("expects a leader of dimension {}", model.n_leader()),
                ));
            }
            let gains = at(
                &p,
                ControllerGains::new(&model, m("k", &f.k)?, m("l", &f.l)?),
            )?;
            let trigger = self.trigger(i);
            at(&p, trigger.validate())?;
            if trigger.variant_e && (trigger.sigma != 0.0 || trigger.rho != 0.0) {
                return Err(schema(
                    format!("{p}.sigma"),
                    "the measurement-triggered variant transmits y_m and needs sigma = rho = 0",
                ));
            }
            if trigger.rho != 0.0 && model.n_error() != model.n_output() {
                return Err(schema(
                    format!("{p}.rho"),
                    "rho != 0 needs as many regulated outputs as measured outputs",
                ));
            }
            followers.push(FollowerSetup {
                model,
                gains,
                trigger,
            });
        }

        let o = &self.observer;
        let petm_a = at(
            "observer",
            PetmAConfig::new(o.iota_s, o.gamma_s, o.iota_v, o.gamma_v, o.combine_mode),
        )?;
        if !(o.mu1 > 0.0 && o.mu2 > 0.0) {
            return Err(schema("observer", "mu1 and mu2 must be positive"));
        }
        if !(self.controller.kappa > 0.0) {
            return Err(schema("controller.kappa", "must be positive"));
        }
        at("bound_params", self.bound_params.validate())?;

        let s = &self.sim;
        if s.sensor_periods.len() != n {
            return Err(schema(
                "sim.sensor_periods",
                format!("{} entries for {n} followers", s.sensor_periods.len()),
            ));
        }
        let phases = self.sensor_phases();
        if phases.len() != n {
            return Err(schema(
                "sim.sensor_phases",
                format!("{} entries for {n} followers", phases.len()),
            ));
        }
        if !(s.tail_window > 0.0 && s.tail_window < s.t_end) {
            return Err(schema(
                "sim.tail_window",
                "must lie strictly between 0 and t_end",
            ));
        }
        let scenario = Scenario {
            config: SimConfig {
                t_end: s.t_end,
                comm_period: s.comm_period,
                sensor_periods: s.sensor_periods.clone(),
                sensor_phases: phases,
                substeps: s.substeps,
            },
            graph,
            leader,
            followers,
            observer: ObserverConfig {
                mu1: o.mu1,
                mu2: o.mu2,
                petm_a,
            },
            kappa: self.controller.kappa,
        };
        at("sim", crate::sim::check_grids(&scenario))?;
        Ok(scenario)
    }
}

/// Writes `m` in the row-list form used by documents.
pub fn to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
