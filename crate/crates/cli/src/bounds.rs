use std::fmt;

use petreg::controller::{sensor_period_bound, steady_error_bound};
use petreg::graph::observer_period_bound;
use petreg::plant::solve_regulator_direct;
use petreg::{BoundMode, Error, ScenarioDocument};
use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentBounds {
    /// 1-based follower id.
    pub agent: usize,
    pub sensor_period: f64,
    pub mode: BoundMode,
    pub sensor_bound: Option<f64>,
    pub admissible: bool,
    /// Steady-state error bound, only with the actuator trigger on.
    pub phi8: Option<f64>,
    /// Why a bound could not be computed.
    pub infeasible: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub comm_period: f64,
    pub comm_bound: f64,
    pub comm_admissible: bool,
    pub agents: Vec<AgentBounds>,
}

impl BoundsReport {
    /// Every configured period is admissible and every requested bound exists.
    pub fn feasible(&self) -> bool {
        self.comm_admissible
            && self
                .agents
                .iter()
                .all(|a| a.admissible && a.infeasible.is_none())
    }

    pub fn max_phi8(&self) -> Option<f64> {
        self.agents.iter().filter_map(|a| a.phi8).reduce(f64::max)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "configured period admissible"
    } else {
        "configured period NOT admissible"
    }
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "communication: T = {} s, bound {:.6e} s: {}",
            self.comm_period,
            self.comm_bound,
            verdict(self.comm_admissible)
        )?;
        for a in &self.agents {
            let mode = match a.mode {
                BoundMode::B => "sensor",
                BoundMode::C => "sensor+actuator",
            };
            write!(f, "agent {}: period {} s, ", a.agent, a.sensor_period)?;
            match a.sensor_bound {
                Some(b) => write!(f, "{mode} bound {b:.6e} s: {}", verdict(a.admissible))?,
                None => write!(f, "{mode} bound unavailable")?,
            }
            if let Some(p) = a.phi8 {
                write!(f, ", steady error bound {p:.6e}")?;
            }
            if let Some(msg) = &a.infeasible {
                write!(f, ", infeasible: {msg}")?;
            }
            writeln!(f)?;
        }
        if let Some(m) = self.max_phi8() {
            writeln!(f, "max steady error bound: {m:.6e}")?;
        }
        Ok(())
    }
}

/// Computes the admissible-period report for a document.
pub fn cmd_bounds(doc: &ScenarioDocument) -> Result<BoundsReport> {
    let sc = doc.build()?;
    let comm_period = sc.config.comm_period;
    let comm_bound = observer_period_bound(&sc.graph, sc.observer.mu1, sc.observer.mu2)?;
    let mut agents = Vec::with_capacity(sc.followers.len());
    for (i, f) in sc.followers.iter().enumerate() {
        let mode = if f.trigger.petm_c_enabled {
            BoundMode::C
        } else {
            BoundMode::B
        };
        let period = sc.config.sensor_periods[i];
        let mut row = AgentBounds {
            agent: i + 1,
            sensor_period: period,
            mode,
            sensor_bound: None,
            admissible: false,
            phi8: None,
            infeasible: None,
        };
        match sensor_period_bound(&f.model, &f.gains.k, &f.gains.l, mode) {
            Ok(b) => {
                row.sensor_bound = Some(b);
                row.admissible = period < b;
            }
            Err(Error::Infeasible(msg)) => row.infeasible = Some(msg),
            Err(e) => return Err(e.into()),
        }
        if f.trigger.petm_c_enabled {
            let reg = solve_regulator_direct(&f.model, sc.leader.s())?;
            match steady_error_bound(
                &f.model,
                &f.gains.k,
                &f.gains.l,
                &reg.u_sol,
                &f.trigger,
                &doc.bound_params,
                period,
            ) {
                Ok(p) => row.phi8 = Some(p),
                Err(Error::Infeasible(msg)) => row.infeasible = Some(msg),
                Err(e) => return Err(e.into()),
            }
        }
        agents.push(row);
    }
    Ok(BoundsReport {
        comm_period,
        comm_bound,
        comm_admissible: comm_period < comm_bound,
        agents,
    })
}
