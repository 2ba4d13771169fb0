//! Deterministic closed-loop simulator.
//!
//! All times are integer ticks. The simulator steps on the greatest common
//! divisor of every sampling grid, integrates the continuous states with a
//! fixed-step RK4 in between (held values frozen), and processes grid events
//! at each step boundary in a fixed order: sensor sampling, sensor trigger,
//! actuator trigger, broadcast trigger.

mod metrics;
mod output;

pub use metrics::{compute_metrics, EdgeCount, Metrics, StreamStats};
pub use output::{write_events_csv, write_trajectory_csv};

use serde::Serialize;

use crate::controller::{
    control_signal, controller_observer_derivative, petm_b_evaluate, petm_c_evaluate, psi_signal,
    ControllerGains, ControllerState, SensorSample, TriggerConfig,
};
use crate::error::{invalid, Error, Result};
use crate::graph::{self, Graph};
use crate::matops::{Matrix, Vector};
use crate::observer::{observer_derivatives, petm_a_evaluate, ObserverState, PetmAConfig};
use crate::plant::{adaptive_regulator_step, FollowerModel, LeaderModel};
use crate::timegrid::{gcd, Grid, Tick, TICK_SECONDS};

/// States whose norm exceeds this are reported as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub comm_period: f64,
    pub sensor_periods: Vec<f64>,
    pub sensor_phases: Vec<f64>,
    /// RK4 steps per base grid interval.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub petm_a: PetmAConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerSetup {
    pub model: FollowerModel,
    pub gains: ControllerGains,
    pub trigger: TriggerConfig,
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SimConfig,
    pub graph: Graph,
    pub leader: LeaderModel,
    pub followers: Vec<FollowerSetup>,
    pub observer: ObserverConfig,
    /// Adaptive regulator gain.
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    PetmA,
    PetmB,
    PetmC,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::PetmA => "petm_a",
            Channel::PetmB => "petm_b",
            Channel::PetmC => "petm_c",
        }
    }
}

/// One transmission. Broadcasts produce one record per outgoing edge with the
/// receiver in `agent`; sensor and actuator records have `src_agent == agent`.
/// Agents are 0-based here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub channel: Channel,
    pub agent: usize,
    pub src_agent: usize,
    pub at: Tick,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
    pub comm_period: u64,
    pub sensor_periods: Vec<u64>,
    pub sensor_phases: Vec<u64>,
}

impl EventLog {
    /// Grid period, in ticks, of the stream a record belongs to.
    pub fn period_of(&self, channel: Channel, agent: usize) -> u64 {
        match channel {
            Channel::PetmA => self.comm_period,
            Channel::PetmB | Channel::PetmC => self.sensor_periods[agent],
        }
    }

    /// Grid offset, in ticks, of the stream a record belongs to. The
    /// actuator grid is never shifted.
    pub fn phase_of(&self, channel: Channel, agent: usize) -> u64 {
        match channel {
            Channel::PetmB => self.sensor_phases[agent],
            Channel::PetmA | Channel::PetmC => 0,
        }
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }
}

/// Per-follower sampled signals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentTrace {
    pub x: Vec<Vector>,
    pub x_hat: Vec<Vector>,
    pub e: Vec<Vector>,
    pub y_m: Vec<Vector>,
    pub u: Vec<Vector>,
    /// `‖Ŝᵢ − S‖_F`.
    pub s_err: Vec<f64>,
    /// `‖v̂ᵢ − v‖`.
    pub v_err: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<Tick>,
    pub v: Vec<Vector>,
    pub agents: Vec<AgentTrace>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Grids {
    base: u64,
    comm: Grid,
    sensor: Vec<Grid>,
    actuator: Vec<Grid>,
    steps: u64,
}

fn build_grids(sc: &Scenario) -> Result<Grids> {
    let cfg = &sc.config;
    let n = sc.followers.len();
    if cfg.sensor_periods.len() != n || cfg.sensor_phases.len() != n {
        return Err(invalid(format!(
            "{n} followers but {} sensor periods and {} phases",
            cfg.sensor_periods.len(),
            cfg.sensor_phases.len()
        )));
    }
    if cfg.substeps == 0 {
        return Err(invalid("substeps must be at least 1"));
    }
    let comm = Grid::from_seconds(cfg.comm_period, 0.0)?;
    let mut sensor = Vec::with_capacity(n);
    let mut actuator = Vec::with_capacity(n);
    let mut base = comm.period;
    for (&p, &ph) in cfg.sensor_periods.iter().zip(&cfg.sensor_phases) {
        let g = Grid::from_seconds(p, ph)?;
        if g.phase >= g.period {
            return Err(invalid(format!(
                "sensor phase {ph} must be below its period {p}"
            )));
        }
        base = gcd(gcd(base, g.period), g.phase);
        sensor.push(g);
        actuator.push(Grid::new(g.period, 0)?);
    }
    let t_end = Tick::from_seconds(cfg.t_end)?;
    if t_end.0 == 0 || t_end.0 % base != 0 {
        return Err(invalid(format!(
            "t_end {} must be a positive multiple of the base step {} s",
            cfg.t_end,
            Tick(base).seconds()
        )));
    }
    Ok(Grids {
        base,
        comm,
        sensor,
        actuator,
        steps: t_end.0 / base,
    })
}

/// Checks that the periods, phases and horizon sit on a common tick lattice.
pub fn check_grids(sc: &Scenario) -> Result<()> {
    build_grids(sc).map(|_| ())
}

fn validate(sc: &Scenario) -> Result<()> {
    let n = sc.graph.len();
    if sc.followers.len() != n {
        return Err(invalid(format!(
            "graph has {n} followers but {} are configured",
            sc.followers.len()
        )));
    }
    if !graph::check_spanning_tree(&sc.graph) {
        return Err(Error::Precondition(
            "the leader does not reach every follower".into(),
        ));
    }
    let nv = sc.leader.dim();
    for (i, f) in sc.followers.iter().enumerate() {
        if f.model.n_leader() != nv {
            return Err(invalid(format!(
                "follower {} expects a leader of dimension {}",
                i + 1,
                f.model.n_leader()
            )));
        }
        f.trigger.validate()?;
        if f.trigger.rho != 0.0 && f.model.n_error() != f.model.n_output() {
            return Err(invalid(format!(
                "follower {}: rho != 0 needs as many regulated outputs as measured outputs",
                i + 1
            )));
        }
    }
    if !(sc.kappa > 0.0) || !(sc.observer.mu1 > 0.0) || !(sc.observer.mu2 > 0.0) {
        return Err(invalid("kappa, mu1 and mu2 must be positive"));
    }
    Ok(())
}

/// Continuous part of one follower's closed loop.
#[derive(Clone)]
struct Flow {
    x: Vector,
    s_hat: Matrix,
    v_hat: Vector,
    chi: Vector,
    x_hat: Vector,
}

impl Flow {
    fn axpy(&self, h: f64, d: &Flow) -> Flow {
        Flow {
            x: &self.x + &d.x * h,
            s_hat: &self.s_hat + &d.s_hat * h,
            v_hat: &self.v_hat + &d.v_hat * h,
            chi: &self.chi + &d.chi * h,
            x_hat: &self.x_hat + &d.x_hat * h,
        }
    }

    fn max_norm(&self) -> f64 {
        [
            self.x.norm(),
            self.s_hat.norm(),
            self.v_hat.norm(),
            self.chi.norm(),
            self.x_hat.norm(),
        ]
        .into_iter()
        .fold(0.0, |acc, v| if v.is_nan() { f64::NAN } else { acc.max(v) })
    }
}

struct Sim<'a> {
    sc: &'a Scenario,
    obs: Vec<ObserverState>,
    ctl: Vec<ControllerState>,
    x: Vec<Vector>,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let nv = sc.leader.dim();
        Self {
            sc,
            obs: vec![ObserverState::zero(nv); sc.followers.len()],
            ctl: sc
                .followers
                .iter()
                .map(|f| ControllerState::zero(&f.model))
                .collect(),
            x: sc.followers.iter().map(|f| f.model.x0.clone()).collect(),
        }
    }

    fn flows(&self) -> Vec<Flow> {
        (0..self.x.len())
            .map(|i| Flow {
                x: self.x[i].clone(),
                s_hat: self.obs[i].s_hat.clone(),
                v_hat: self.obs[i].v_hat.clone(),
                chi: self.ctl[i].chi_hat.clone(),
                x_hat: self.ctl[i].x_hat.clone(),
            })
            .collect()
    }

    fn store(&mut self, flows: Vec<Flow>) {
        for (i, f) in flows.into_iter().enumerate() {
            self.x[i] = f.x;
            self.obs[i].s_hat = f.s_hat;
            self.obs[i].v_hat = f.v_hat;
            self.ctl[i].chi_hat = f.chi;
            self.ctl[i].x_hat = f.x_hat;
        }
    }

    /// Live control law and the input actually applied to the plant.
    fn inputs(&self, i: usize) -> Result<(Vector, Vector)> {
        let f = &self.sc.followers[i];
        let omega = control_signal(&self.ctl[i], &f.model, &f.gains.k, &self.obs[i].v_hat)?;
        let u = self.ctl[i].applied_input(&f.trigger, &omega).clone();
        Ok((omega, u))
    }

    fn rhs(&self, flows: &[Flow], t: f64) -> Result<Vec<Flow>> {
        let sc = self.sc;
        let mut obs = self.obs.clone();
        for (o, f) in obs.iter_mut().zip(flows) {
            o.s_hat.copy_from(&f.s_hat);
            o.v_hat.copy_from(&f.v_hat);
        }
        let dobs = observer_derivatives(
            &obs,
            &sc.graph,
            &sc.leader,
            sc.observer.mu1,
            sc.observer.mu2,
            t,
        )?;
        let v = sc.leader.flow(t)?;
        let mut out = Vec::with_capacity(flows.len());
        for (i, (f, d)) in flows.iter().zip(dobs).enumerate() {
            let setup = &sc.followers[i];
            let m = &setup.model;
            let mut ctl = self.ctl[i].clone();
            ctl.x_hat.copy_from(&f.x_hat);
            ctl.chi_hat.copy_from(&f.chi);
            let omega = control_signal(&ctl, m, &setup.gains.k, &f.v_hat)?;
            let u = ctl.applied_input(&setup.trigger, &omega);
            out.push(Flow {
                x: m.derivative(&f.x, u, &v)?,
                s_hat: d.ds,
                v_hat: d.dv,
                chi: adaptive_regulator_step(&f.chi, &f.s_hat, m, sc.kappa)?,
                x_hat: controller_observer_derivative(
                    &ctl,
                    m,
                    &setup.gains,
                    &setup.trigger,
                    &f.v_hat,
                    t,
                )?,
            });
        }
        Ok(out)
    }

    fn rk4(&mut self, t0: f64, h: f64) -> Result<()> {
        let y = self.flows();
        let stage = |y: &[Flow], k: &[Flow], c: f64| -> Vec<Flow> {
            y.iter().zip(k).map(|(a, b)| a.axpy(c, b)).collect()
        };
        let k1 = self.rhs(&y, t0)?;
        let k2 = self.rhs(&stage(&y, &k1, 0.5 * h), t0 + 0.5 * h)?;
        let k3 = self.rhs(&stage(&y, &k2, 0.5 * h), t0 + 0.5 * h)?;
        let k4 = self.rhs(&stage(&y, &k3, h), t0 + h)?;
        let next = y
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.axpy(h / 6.0, &k1[i])
                    .axpy(h / 3.0, &k2[i])
                    .axpy(h / 3.0, &k3[i])
                    .axpy(h / 6.0, &k4[i])
            })
            .collect();
        self.store(next);
        Ok(())
    }

    /// Processes every grid event at `tau`. At `t = 0` all channels transmit.
    fn events(&mut self, tau: Tick, grids: &Grids, log: &mut EventLog) -> Result<()> {
        let sc = self.sc;
        let t = tau.seconds();
        let initial = tau == Tick::ZERO;
        let v = sc.leader.flow(t)?;

        for i in 0..sc.followers.len() {
            let grid = grids.sensor[i];
            if !(initial || grid.contains(tau)) {
                continue;
            }
            let setup = &sc.followers[i];
            let m = &setup.model;
            let (omega, u) = self.inputs(i)?;
            let v_bar = self.obs[i].held_leader_estimate(t)?;
            let until = if tau.0 < grid.phase {
                Tick(grid.phase)
            } else {
                Tick(tau.0 + grid.period)
            };
            self.ctl[i].sample(tau, until, omega, v_bar.clone());
            if !grid.contains(tau) {
                // the initial sample precedes a phase-shifted sensor grid
                let y_m = m.measurement(&self.x[i], &u, &v)?;
                let psi = psi_signal(m, &setup.trigger, &v_bar, &y_m)?;
                self.ctl[i].transmit_psi(tau, psi, y_m);
                log.records.push(EventRecord {
                    channel: Channel::PetmB,
                    agent: i,
                    src_agent: i,
                    at: tau,
                });
                continue;
            }
            let y_m = m.measurement(&self.x[i], &u, &v)?;
            let psi = psi_signal(m, &setup.trigger, &v_bar, &y_m)?;
            let sample = SensorSample { psi, y_m };
            let fire =
                initial || petm_b_evaluate(&self.ctl[i], &setup.trigger, &grid, tau, &sample)?.fire;
            if fire {
                self.ctl[i].transmit_psi(tau, sample.psi, sample.y_m);
                log.records.push(EventRecord {
                    channel: Channel::PetmB,
                    agent: i,
                    src_agent: i,
                    at: tau,
                });
            }
        }

        for i in 0..sc.followers.len() {
            let setup = &sc.followers[i];
            if !setup.trigger.petm_c_enabled || !grids.actuator[i].contains(tau) {
                continue;
            }
            let (omega, _) = self.inputs(i)?;
            let fire = initial
                || petm_c_evaluate(
                    &self.ctl[i],
                    &setup.trigger,
                    &grids.actuator[i],
                    tau,
                    &omega,
                )?
                .fire;
            if fire {
                self.ctl[i].actuate(tau, omega);
                log.records.push(EventRecord {
                    channel: Channel::PetmC,
                    agent: i,
                    src_agent: i,
                    at: tau,
                });
            }
        }

        if grids.comm.contains(tau) {
            for i in 0..sc.followers.len() {
                let fire = initial
                    || petm_a_evaluate(&self.obs[i], &sc.observer.petm_a, &grids.comm, tau)?.fire;
                if fire {
                    self.obs[i].broadcast(tau);
                    for j in sc.graph.out_neighbors(i) {
                        log.records.push(EventRecord {
                            channel: Channel::PetmA,
                            agent: j,
                            src_agent: i,
                            at: tau,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn record(&self, tau: Tick, traj: &mut Trajectory) -> Result<()> {
        let t = tau.seconds();
        let v = self.sc.leader.flow(t)?;
        for (i, tr) in traj.agents.iter_mut().enumerate() {
            let m = &self.sc.followers[i].model;
            let (_, u) = self.inputs(i)?;
            tr.e.push(m.regulation_error(&self.x[i], &u, &v)?);
            tr.y_m.push(m.measurement(&self.x[i], &u, &v)?);
            tr.x.push(self.x[i].clone());
            tr.x_hat.push(self.ctl[i].x_hat.clone());
            tr.u.push(u);
            tr.s_err
                .push((&self.obs[i].s_hat - self.sc.leader.s()).norm());
            tr.v_err.push((&self.obs[i].v_hat - &v).norm());
        }
        traj.times.push(tau);
        traj.v.push(v);
        Ok(())
    }

    fn check_divergence(&self, tau: Tick) -> Result<()> {
        for (i, f) in self.flows().iter().enumerate() {
            let n = f.max_norm();
            if !(n <= DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    time: tau.seconds(),
                    detail: format!("follower {} state norm {n:e}", i + 1),
                });
            }
        }
        Ok(())
    }
}

/// Runs the closed loop from `t = 0` to `t_end`, sampling the trajectory on
/// every base step.
pub fn run_scenario(sc: &Scenario) -> Result<(Trajectory, EventLog)> {
    validate(sc)?;
    let grids = build_grids(sc)?;
    let mut sim = Sim::new(sc);
    let mut log = EventLog {
        records: Vec::new(),
        comm_period: grids.comm.period,
        sensor_periods: grids.sensor.iter().map(|g| g.period).collect(),
        sensor_phases: grids.sensor.iter().map(|g| g.phase).collect(),
    };
    let mut traj = Trajectory {
        agents: vec![AgentTrace::default(); sc.followers.len()],
        ..Trajectory::default()
    };
    let h_ticks = grids.base as f64 / sc.config.substeps as f64;
    let h = h_ticks * TICK_SECONDS;
    for step in 0..=grids.steps {
        let tau = Tick(step * grids.base);
        sim.events(tau, &grids, &mut log)?;
        sim.record(tau, &mut traj)?;
        if step == grids.steps {
            break;
        }
        for sub in 0..sc.config.substeps {
            let t0 = (tau.0 as f64 + sub as f64 * h_ticks) * TICK_SECONDS;
            sim.rk4(t0, h)?;
        }
        sim.check_divergence(Tick(tau.0 + grids.base))?;
    }
    Ok((traj, log))
}
