//! Admissible sensor periods and the steady-state error bound.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matops::{self, Matrix};
use crate::plant::FollowerModel;

use super::TriggerConfig;

const BISECT_LO: f64 = 1e-6;
const BISECT_HI: f64 = 10.0;
const BISECT_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// Sensor channel triggered, actuator fed continuously.
    B,
    /// Both sensor and actuator channels triggered.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub zeta1: f64,
    /// Leader-rate constant, `‖v(τ_p) − v(t)‖ ≤ ζ₂·𝒯`; zero for a constant leader.
    pub zeta2: f64,
    pub zeta3: f64,
    pub epsilon: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta1 > 0.0 && self.zeta3 > 0.0 && self.epsilon > 0.0) {
            return Err(invalid("zeta1, zeta3 and epsilon must be positive"));
        }
        if !(self.zeta2 >= 0.0) {
            return Err(invalid("zeta2 must be non-negative"));
        }
        if ![self.zeta1, self.zeta2, self.zeta3, self.epsilon]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(invalid("bound parameters must be finite"));
        }
        Ok(())
    }
}

/// One closed-loop sampling constraint `‖W G‖·δ/(1−δ) < 1` with
/// `δ(𝒯) = 𝒯·‖M‖·e^{‖A‖𝒯}`, where `W` solves `W M + Mᵀ W = −2I`.
struct Loop {
    weight: Matrix,
    coupling: f64,
    closed_norm: f64,
    open_norm: f64,
}

impl Loop {
    fn new(a: &Matrix, closed: &Matrix, gain_product: &Matrix, what: &str) -> Result<Self> {
        if !matops::is_hurwitz(closed)? {
            return Err(Error::Precondition(format!("{what} is not Hurwitz")));
        }
        let weight = matops::solve_sym_lyapunov(closed, -2.0)?;
        Ok(Self {
            coupling: matops::norm2(&(&weight * gain_product)),
            closed_norm: matops::norm2(closed),
            open_norm: matops::norm2(a),
            weight,
        })
    }

    fn delta(&self, period: f64) -> f64 {
        period * self.closed_norm * (self.open_norm * period).exp()
    }

    /// Left side of the constraint; infinite once `δ ≥ 1`.
    fn lhs(&self, period: f64) -> f64 {
        let d = self.delta(period);
        if d >= 1.0 {
            f64::INFINITY
        } else {
            self.coupling * d / (1.0 - d)
        }
    }

    fn sup_period(&self) -> f64 {
        if self.lhs(BISECT_HI) < 1.0 {
            return BISECT_HI;
        }
        let (mut lo, mut hi) = (0.0, BISECT_HI);
        if self.lhs(BISECT_LO) < 1.0 {
            lo = BISECT_LO;
        }
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.lhs(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn check_gains(m: &FollowerModel, k: &Matrix, l: &Matrix) -> Result<()> {
    if k.shape() != (m.n_input(), m.n_state()) || l.shape() != (m.n_state(), m.n_output()) {
        return Err(invalid("gain dimensions do not match the follower"));
    }
    matops::ensure_finite(k, "K")?;
    matops::ensure_finite(l, "L")
}

fn estimator_loop(m: &FollowerModel, l: &Matrix) -> Result<Loop> {
    let closed = &m.a + l * &m.c_m;
    Loop::new(&m.a, &closed, &(l * &m.c_m), "A + L C_m")
}

fn state_loop(m: &FollowerModel, k: &Matrix) -> Result<Loop> {
    let closed = &m.a + &m.b * k;
    Loop::new(&m.a, &closed, &(&m.b * k), "A + B K")
}

/// Supremum of sensor periods satisfying the sampling constraint(s) of `mode`.
pub fn sensor_period_bound(
    m: &FollowerModel,
    k: &Matrix,
    l: &Matrix,
    mode: BoundMode,
) -> Result<f64> {
    check_gains(m, k, l)?;
    let mut bound = estimator_loop(m, l)?.sup_period();
    if mode == BoundMode::C {
        bound = bound.min(state_loop(m, k)?.sup_period());
    }
    if bound <= 0.0 {
        return Err(Error::Infeasible(
            "no positive sensor period satisfies the sampling constraint".into(),
        ));
    }
    Ok(bound)
}

/// Intermediate values of the error-bound chain; `phi[0]` is φ₁.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundChain {
    pub delta3: f64,
    pub delta4: f64,
    pub phi: [f64; 8],
}

impl BoundChain {
    pub fn bound(&self) -> f64 {
        self.phi[7]
    }
}

/// Evaluates φ₁…φ₈ for the thresholds in `trig` and the given sensor period.
pub fn error_bound_chain(
    m: &FollowerModel,
    k: &Matrix,
    l: &Matrix,
    u_sol: &Matrix,
    trig: &TriggerConfig,
    bp: &BoundParams,
    sensor_period: f64,
) -> Result<BoundChain> {
    check_gains(m, k, l)?;
    bp.validate()?;
    trig.validate()?;
    if !(sensor_period >= 0.0) || !sensor_period.is_finite() {
        return Err(invalid("sensor period must be finite and non-negative"));
    }
    if u_sol.shape() != (m.n_input(), m.n_leader()) {
        return Err(invalid("U has the wrong shape"));
    }
    let est = estimator_loop(m, l)?;
    let st = state_loop(m, k)?;
    let t = sensor_period;
    let ip = trig.iota_psi_bar;
    let iw = trig.iota_omega_bar;
    let growth = (st.open_norm * t).exp();

    let d3 = est.delta(t);
    if d3 >= 1.0 {
        return Err(Error::Infeasible(format!("delta3 = {d3} must be below 1")));
    }
    let d4 = st.delta(t);
    if d4 >= 1.0 {
        return Err(Error::Infeasible(format!("delta4 = {d4} must be below 1")));
    }
    let dx_tilde = d3 / (1.0 - d3);
    let dx_bar = d4 / (1.0 - d4);

    let den3 = 1.0 - est.coupling * dx_tilde - bp.zeta1 - bp.epsilon;
    if den3 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "||Q L C_m|| * delta_x + zeta1 + epsilon = {} must be below 1",
            1.0 - den3
        )));
    }
    let den7 = 1.0 - st.coupling * dx_bar - bp.zeta3 - bp.epsilon;
    if den7 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "||R B K|| * delta_x + zeta3 + epsilon = {} must be below 1",
            1.0 - den7
        )));
    }

    let (q_min, q_max) = matops::symmetric_eigen_range(&est.weight)?;
    let (r_min, r_max) = matops::symmetric_eigen_range(&st.weight)?;
    let ql = matops::norm2(&(&est.weight * l));

    let phi1 = t * matops::norm2(l) * ip * growth / (1.0 - d3);
    let phi2 = (est.coupling * phi1 + ql * ip).powi(2) / (4.0 * bp.zeta1);
    let phi3 = q_max * phi2 / (q_min * den3);
    let phi4 = matops::norm2(k) * phi3 + iw + matops::norm2(u_sol) * bp.zeta2 * t;
    let phi5 = t * growth * phi4 / (1.0 - d4);
    let phi6 = (st.coupling * phi5 + matops::norm2(&st.weight) * phi4).powi(2) / (4.0 * bp.zeta3);
    let phi7 = (r_max * phi6 / (r_min * den7)).sqrt();
    let dk = &m.d * k;
    let phi8 = matops::norm2(&(&m.c + &dk)) * phi7 + matops::norm2(&dk) * phi3;

    Ok(BoundChain {
        delta3: d3,
        delta4: d4,
        phi: [phi1, phi2, phi3, phi4, phi5, phi6, phi7, phi8],
    })
}

/// Steady-state regulation-error bound φ₈.
pub fn steady_error_bound(
    m: &FollowerModel,
    k: &Matrix,
    l: &Matrix,
    u_sol: &Matrix,
    trig: &TriggerConfig,
    bp: &BoundParams,
    sensor_period: f64,
) -> Result<f64> {
    error_bound_chain(m, k, l, u_sol, trig, bp, sensor_period).map(|c| c.bound())
}
