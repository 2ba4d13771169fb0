//! Periodic event-triggered cooperative output regulation of linear
//! leader-follower multi-agent systems.
//!
//! The crate provides the distributed leader observer, the output-feedback
//! controller with its sensor and actuator triggers, the admissible-period
//! and steady-state error bounds, and a deterministic closed-loop simulator.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod graph;
pub mod matops;
pub mod observer;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod timegrid;

pub use controller::{
    BoundChain, BoundMode, BoundParams, ControllerGains, ControllerState, TriggerConfig,
};
pub use error::{Error, Result};
pub use graph::Graph;
pub use matops::{Matrix, Vector};
pub use observer::{CombineMode, ObserverState, PetmAConfig};
pub use plant::{FollowerModel, LeaderModel, RegulatorSolution};
pub use scenario::ScenarioDocument;
pub use sim::{run_scenario, EventLog, Scenario, SimConfig, Trajectory};
pub use timegrid::{Grid, Tick};
