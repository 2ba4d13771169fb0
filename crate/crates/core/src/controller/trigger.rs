use crate::error::{invalid, Error, Result};
use crate::matops::Vector;
use crate::timegrid::{Grid, Tick};

use super::{ControllerState, TriggerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDecision {
    pub fire: bool,
    pub f: f64,
}

/// Sensor-side signals at a sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSample {
    pub psi: Vector,
    pub y_m: Vector,
}

fn check_instant(grid: &Grid, tau: Tick, anchor: Tick) -> Result<()> {
    grid.require(tau)?;
    if tau < anchor {
        return Err(invalid("trigger evaluated before the last transmission"));
    }
    Ok(())
}

/// Sensor-to-controller trigger. Fires iff
/// `‖ψ(τ) − ψ(τ̄)‖ > ι_ψ e^{−γ_ψ τ} + ῑ_ψ` (the offset only in force with the
/// actuator trigger); the measurement variant compares `y_m` instead of `ψ`.
pub fn petm_b_evaluate(
    st: &ControllerState,
    trig: &TriggerConfig,
    grid: &Grid,
    tau: Tick,
    now: &SensorSample,
) -> Result<TriggerDecision> {
    check_instant(grid, tau, st.psi_anchor)?;
    let deviation = if trig.variant_e {
        if now.y_m.len() != st.y_held.len() {
            return Err(invalid("measurement dimension mismatch"));
        }
        (&now.y_m - &st.y_held).norm()
    } else {
        if now.psi.len() != st.psi_held.len() {
            return Err(invalid("psi dimension mismatch"));
        }
        (&now.psi - &st.psi_held).norm()
    };
    let t = tau.seconds();
    let threshold = trig.iota_psi * (-trig.gamma_psi * t).exp() + trig.psi_offset();
    let f = deviation - threshold;
    Ok(TriggerDecision { fire: f > 0.0, f })
}

/// Controller-to-actuator trigger. Fires iff
/// `‖ω(τ) − ω(ς̄)‖ > ι_ω e^{−γ_ω τ} + ῑ_ω`.
pub fn petm_c_evaluate(
    st: &ControllerState,
    trig: &TriggerConfig,
    grid: &Grid,
    tau: Tick,
    omega: &Vector,
) -> Result<TriggerDecision> {
    if !trig.petm_c_enabled {
        return Err(Error::InvalidCall(
            "actuator trigger evaluated while the actuator channel is continuous".into(),
        ));
    }
    check_instant(grid, tau, st.omega_anchor)?;
    if omega.len() != st.omega_held.len() {
        return Err(invalid("control signal dimension mismatch"));
    }
    let t = tau.seconds();
    let threshold = trig.iota_omega * (-trig.gamma_omega * t).exp() + trig.iota_omega_bar;
    let f = (omega - &st.omega_held).norm() - threshold;
    Ok(TriggerDecision { fire: f > 0.0, f })
}
