//! Periodic event-triggered dynamic output-feedback controller.
//!
//! Per follower the controller runs a state observer driven by locally
//! sampled quantities and by the last `ψ` transmitted by the sensor, forms
//! the control law `ω` from the adaptive regulator solution, and optionally
//! forwards `ω` to the actuator through a second trigger.

mod bounds;
mod trigger;

pub use bounds::{
    error_bound_chain, sensor_period_bound, steady_error_bound, BoundChain, BoundMode, BoundParams,
};
pub use trigger::{petm_b_evaluate, petm_c_evaluate, SensorSample, TriggerDecision};

use crate::error::{invalid, Error, Result};
use crate::matops::{self, Matrix, Vector};
use crate::plant::{unpack_regulator, FollowerModel};
use crate::timegrid::Tick;

/// Feedback gain `K` and observer injection gain `L` of one follower.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k: Matrix,
    pub l: Matrix,
}

impl ControllerGains {
    /// Requires `A + B K` and `A + L C_m` to be Hurwitz.
    pub fn new(m: &FollowerModel, k: Matrix, l: Matrix) -> Result<Self> {
        if k.shape() != (m.n_input(), m.n_state()) {
            return Err(invalid(format!(
                "K is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                m.n_input(),
                m.n_state()
            )));
        }
        if l.shape() != (m.n_state(), m.n_output()) {
            return Err(invalid(format!(
                "L is {}x{}, expected {}x{}",
                l.nrows(),
                l.ncols(),
                m.n_state(),
                m.n_output()
            )));
        }
        if !matops::is_hurwitz(&(&m.a + &m.b * &k))? {
            return Err(Error::Precondition("A + B K is not Hurwitz".into()));
        }
        if !matops::is_hurwitz(&(&m.a + &l * &m.c_m))? {
            return Err(Error::Precondition("A + L C_m is not Hurwitz".into()));
        }
        Ok(Self { k, l })
    }
}

/// Trigger thresholds and injection weights of one follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerConfig {
    pub iota_psi: f64,
    pub gamma_psi: f64,
    /// Constant threshold offset on the sensor channel; only used with the
    /// actuator trigger or the measurement-based variant.
    pub iota_psi_bar: f64,
    pub iota_omega: f64,
    pub gamma_omega: f64,
    pub iota_omega_bar: f64,
    pub sigma: f64,
    pub rho: f64,
    pub petm_c_enabled: bool,
    /// Trigger the sensor channel on the measurement `y_m` instead of `ψ`.
    pub variant_e: bool,
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("iota_psi", self.iota_psi),
            ("gamma_psi", self.gamma_psi),
            ("iota_psi_bar", self.iota_psi_bar),
            ("iota_omega", self.iota_omega),
            ("gamma_omega", self.gamma_omega),
            ("iota_omega_bar", self.iota_omega_bar),
            ("sigma", self.sigma),
            ("rho", self.rho),
        ] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(invalid(format!("{name} must be non-negative, got {x}")));
            }
        }
        Ok(())
    }

    /// Constant part of the sensor-channel threshold actually in force.
    pub fn psi_offset(&self) -> f64 {
        if self.petm_c_enabled || self.variant_e {
            self.iota_psi_bar
        } else {
            0.0
        }
    }
}

/// Quantities latched by the local sampler at the last sensor instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCache {
    pub at: Tick,
    /// Next sensor instant; the cache is valid on `[at, until]`.
    pub until: Tick,
    pub x_hat: Vector,
    pub omega: Vector,
    pub v_bar: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub x_hat: Vector,
    /// Adaptive regulator estimate `vec(col(X̂, Û))`.
    pub chi_hat: Vector,
    pub psi_held: Vector,
    pub psi_anchor: Tick,
    /// Measurement at the last sensor transmission.
    pub y_held: Vector,
    pub omega_held: Vector,
    pub omega_anchor: Tick,
    pub cache: Option<SampledCache>,
}

impl ControllerState {
    /// Zero observer and regulator estimates; held signals start at zero.
    pub fn zero(m: &FollowerModel) -> Self {
        Self {
            x_hat: Vector::zeros(m.n_state()),
            chi_hat: Vector::zeros(m.regulator_len()),
            psi_held: Vector::zeros(m.n_output()),
            psi_anchor: Tick::ZERO,
            y_held: Vector::zeros(m.n_output()),
            omega_held: Vector::zeros(m.n_input()),
            omega_anchor: Tick::ZERO,
            cache: None,
        }
    }

    /// Latches the sampler at a sensor instant.
    pub fn sample(&mut self, at: Tick, until: Tick, omega: Vector, v_bar: Vector) {
        self.cache = Some(SampledCache {
            at,
            until,
            x_hat: self.x_hat.clone(),
            omega,
            v_bar,
        });
    }

    /// Records a sensor-to-controller transmission.
    pub fn transmit_psi(&mut self, tau: Tick, psi: Vector, y_m: Vector) {
        self.psi_held = psi;
        self.y_held = y_m;
        self.psi_anchor = tau;
    }

    /// Records a controller-to-actuator transmission.
    pub fn actuate(&mut self, tau: Tick, omega: Vector) {
        self.omega_held = omega;
        self.omega_anchor = tau;
    }

    /// Input currently applied to the plant given the live control law `omega`.
    pub fn applied_input<'a>(&'a self, trig: &TriggerConfig, omega: &'a Vector) -> &'a Vector {
        if trig.petm_c_enabled {
            &self.omega_held
        } else {
            omega
        }
    }
}

/// `ω = K x̂ + (Û − K X̂) v̂`.
pub fn control_signal(
    st: &ControllerState,
    m: &FollowerModel,
    k: &Matrix,
    v_hat: &Vector,
) -> Result<Vector> {
    if st.x_hat.len() != m.n_state() || v_hat.len() != m.n_leader() {
        return Err(invalid(
            "controller signal dimensions do not match the follower",
        ));
    }
    let (x_reg, u_reg) = unpack_regulator(&st.chi_hat, m)?;
    Ok(k * &st.x_hat + (u_reg - k * x_reg) * v_hat)
}

/// `ψ = σ F_m v̄ − ρ F v̄ − y_m`.
pub fn psi_signal(
    m: &FollowerModel,
    trig: &TriggerConfig,
    v_bar: &Vector,
    y_m: &Vector,
) -> Result<Vector> {
    if v_bar.len() != m.n_leader() || y_m.len() != m.n_output() {
        return Err(invalid("psi inputs do not match the follower dimensions"));
    }
    let mut psi = -y_m;
    if trig.sigma != 0.0 {
        psi += &m.f_m * v_bar * trig.sigma;
    }
    if trig.rho != 0.0 {
        psi -= rho_term(m, v_bar)? * trig.rho;
    }
    Ok(psi)
}

fn rho_term(m: &FollowerModel, v_bar: &Vector) -> Result<Vector> {
    if m.n_error() != m.n_output() {
        return Err(invalid(
            "rho != 0 needs as many regulated outputs as measured outputs",
        ));
    }
    Ok(&m.f * v_bar)
}

/// Right-hand side of the controller's state observer:
///
/// ```text
/// dx̂ = A x̂ + B ω + E v̂ + L (C_m x̂(τ_p) + D_m ω(τ_p))
///      + L (ρ F v̄(τ_p) + (1 − σ) F_m v̄(τ_p)) + L ψ(τ̄_q)
/// ```
pub fn controller_observer_derivative(
    st: &ControllerState,
    m: &FollowerModel,
    gains: &ControllerGains,
    trig: &TriggerConfig,
    v_hat: &Vector,
    t: f64,
) -> Result<Vector> {
    let cache = st
        .cache
        .as_ref()
        .ok_or_else(|| Error::Internal("no sensor sample has been taken".into()))?;
    let start = cache.at.seconds();
    let end = cache.until.seconds();
    if t < start - 1e-12 || t > end + 1e-12 {
        return Err(Error::Internal(format!(
            "sensor sample from {start} s is stale at t = {t} s"
        )));
    }
    let omega = control_signal(st, m, &gains.k, v_hat)?;
    let mut innovation = &m.c_m * &cache.x_hat + &m.d_m * &cache.omega + &st.psi_held;
    if trig.rho != 0.0 {
        innovation += rho_term(m, &cache.v_bar)? * trig.rho;
    }
    if trig.sigma != 1.0 {
        innovation += &m.f_m * &cache.v_bar * (1.0 - trig.sigma);
    }
    Ok(&m.a * &st.x_hat + &m.b * omega + &m.e * v_hat + &gains.l * innovation)
}
