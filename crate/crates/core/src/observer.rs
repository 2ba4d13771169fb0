//! Periodic event-triggered distributed observer for the leader's `(S, v)`.
//!
//! Each follower integrates its estimates continuously but only broadcasts
//! them when its trigger fires on the shared communication grid. Between
//! broadcasts, neighbours use the last broadcast `Ŝ` and extrapolate the last
//! broadcast `v̂` under it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::matops::{self, Matrix, Vector};
use crate::plant::LeaderModel;
use crate::timegrid::{Grid, Tick};

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub s_hat: Matrix,
    pub v_hat: Vector,
    /// `Ŝᵢ` as broadcast at the last trigger.
    pub s_held: Matrix,
    /// Last trigger instant.
    pub anchor: Tick,
    /// `v̂ᵢ` as broadcast at the last trigger.
    pub v_anchor: Vector,
}

impl ObserverState {
    /// Zero estimates, broadcast at `t = 0`.
    pub fn zero(nv: usize) -> Self {
        Self::new(Matrix::zeros(nv, nv), Vector::zeros(nv))
    }

    /// Starts from the given estimates with an initial broadcast at `t = 0`.
    pub fn new(s_hat: Matrix, v_hat: Vector) -> Self {
        Self {
            s_held: s_hat.clone(),
            v_anchor: v_hat.clone(),
            s_hat,
            v_hat,
            anchor: Tick::ZERO,
        }
    }

    /// Re-anchors the held values at the current estimates.
    pub fn broadcast(&mut self, tau: Tick) {
        self.s_held = self.s_hat.clone();
        self.v_anchor = self.v_hat.clone();
        self.anchor = tau;
    }

    /// `v̄ᵢ(t) = exp(Ŝᵢ(t̄)(t − t̄)) v̂ᵢ(t̄)`.
    pub fn held_leader_estimate(&self, t: f64) -> Result<Vector> {
        let elapsed = t - self.anchor.seconds();
        if elapsed < -1e-12 || !t.is_finite() {
            return Err(invalid(format!(
                "t = {t} s precedes the last broadcast at {} s",
                self.anchor.seconds()
            )));
        }
        let elapsed = elapsed.max(0.0);
        if elapsed == 0.0 {
            return Ok(self.v_anchor.clone());
        }
        Ok(matops::expm_unchecked(&(&self.s_held * elapsed)) * &self.v_anchor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDerivative {
    pub ds: Matrix,
    pub dv: Vector,
}

/// Right-hand side of the observer for every follower at time `t`, with all
/// broadcast values held. The leader channel uses the true `S` and `v(t)`.
pub fn observer_derivatives(
    states: &[ObserverState],
    g: &Graph,
    leader: &LeaderModel,
    mu1: f64,
    mu2: f64,
    t: f64,
) -> Result<Vec<ObserverDerivative>> {
    if states.len() != g.len() {
        return Err(invalid(format!(
            "{} observer states for a graph of {} followers",
            states.len(),
            g.len()
        )));
    }
    let nv = leader.dim();
    for st in states {
        if st.s_hat.shape() != (nv, nv)
            || st.s_held.shape() != (nv, nv)
            || st.v_hat.len() != nv
            || st.v_anchor.len() != nv
        {
            return Err(invalid("observer state dimensions do not match the leader"));
        }
    }
    let v = leader.flow(t)?;
    let held: Vec<Vector> = states
        .iter()
        .map(|st| st.held_leader_estimate(t))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(states.len());
    for (i, st) in states.iter().enumerate() {
        let mut ds = Matrix::zeros(nv, nv);
        let mut dv_sum = Vector::zeros(nv);
        for j in g.in_neighbors(i) {
            ds += &states[j].s_held - &st.s_held;
            dv_sum += &held[j] - &held[i];
        }
        if g.is_pinned(i) {
            ds += leader.s() - &st.s_held;
            dv_sum += &v - &held[i];
        }
        let dv = &st.s_held * &st.v_hat + dv_sum * mu2;
        out.push(ObserverDerivative { ds: ds * mu1, dv });
    }
    Ok(out)
}

/// How the `Ŝ` and `v̂` trigger conditions combine into one broadcast decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// Both deviations must exceed their thresholds.
    #[default]
    And,
    /// Either deviation exceeding its threshold suffices.
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PetmAConfig {
    pub iota_s: f64,
    pub gamma_s: f64,
    pub iota_v: f64,
    pub gamma_v: f64,
    pub combine: CombineMode,
}

impl PetmAConfig {
    pub fn new(
        iota_s: f64,
        gamma_s: f64,
        iota_v: f64,
        gamma_v: f64,
        combine: CombineMode,
    ) -> Result<Self> {
        for (name, x) in [
            ("iota_s", iota_s),
            ("gamma_s", gamma_s),
            ("iota_v", iota_v),
            ("gamma_v", gamma_v),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(Self {
            iota_s,
            gamma_s,
            iota_v,
            gamma_v,
            combine,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PetmADecision {
    pub fire: bool,
    pub f_s: f64,
    pub f_v: f64,
}

fn petm_a_values(
    s_now: &Matrix,
    v_now: &Vector,
    st: &ObserverState,
    cfg: &PetmAConfig,
    tau: Tick,
) -> Result<PetmADecision> {
    let t = tau.seconds();
    let f_s = (s_now - &st.s_held).norm() - cfg.iota_s * (-cfg.gamma_s * t).exp();
    let f_v = (v_now - st.held_leader_estimate(t)?).norm() - cfg.iota_v * (-cfg.gamma_v * t).exp();
    let fire = match cfg.combine {
        CombineMode::And => f_s > 0.0 && f_v > 0.0,
        CombineMode::Or => f_s > 0.0 || f_v > 0.0,
    };
    Ok(PetmADecision { fire, f_s, f_v })
}

/// Evaluates the broadcast trigger at grid instant `tau`. The caller is
/// responsible for calling [`ObserverState::broadcast`] when it fires.
pub fn petm_a_evaluate(
    st: &ObserverState,
    cfg: &PetmAConfig,
    grid: &Grid,
    tau: Tick,
) -> Result<PetmADecision> {
    grid.require(tau)?;
    if tau < st.anchor {
        return Err(invalid("trigger evaluated before the last broadcast"));
    }
    petm_a_values(&st.s_hat, &st.v_hat, st, cfg, tau)
}

/// Replays the broadcast trigger over recorded `(τ, Ŝ(τ), v̂(τ))` samples and
/// returns the trigger instants (the first sample is the initial broadcast).
pub fn replay_petm_a(
    samples: &[(Tick, Matrix, Vector)],
    cfg: &PetmAConfig,
    grid: &Grid,
) -> Result<Vec<Tick>> {
    let Some((t0, s0, v0)) = samples.first() else {
        return Ok(Vec::new());
    };
    let mut st = ObserverState::new(s0.clone(), v0.clone());
    st.anchor = *t0;
    let mut fired = vec![*t0];
    for (tau, s, v) in &samples[1..] {
        if !grid.contains(*tau) || *tau <= st.anchor {
            continue;
        }
        st.s_hat = s.clone();
        st.v_hat = v.clone();
        if petm_a_values(s, v, &st, cfg, *tau)?.fire {
            st.broadcast(*tau);
            fired.push(*tau);
        }
    }
    Ok(fired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::tests::rotation;

    fn leader() -> LeaderModel {
        LeaderModel::new(rotation(), Vector::from_vec(vec![0.9, -0.5])).unwrap()
    }

    fn cfg(combine: CombineMode) -> PetmAConfig {
        PetmAConfig::new(2.0, 1.0, 2.0, 1.0, combine).unwrap()
    }

    #[test]
    fn held_estimate_examples() {
        let mut st = ObserverState::new(rotation(), Vector::from_vec(vec![1.0, 2.0]));
        st.anchor = Tick(500_000);
        assert_eq!(st.held_leader_estimate(0.5).unwrap(), st.v_anchor);
        assert!(st.held_leader_estimate(0.4).is_err());
        let mut still = st.clone();
        still.s_held = Matrix::zeros(2, 2);
        assert_eq!(still.held_leader_estimate(3.0).unwrap(), still.v_anchor);

        // the leader's own channel reproduces v(t)
        let l = leader();
        let mut own = ObserverState::new(l.s().clone(), l.flow(1.2).unwrap());
        own.anchor = Tick::from_seconds(1.2).unwrap();
        for &t in &[1.2, 2.0, 7.77] {
            assert!((own.held_leader_estimate(t).unwrap() - l.flow(t).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn consensus_fixed_point() {
        let l = leader();
        let g = Graph::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], &[0]).unwrap();
        let t = 2.5;
        let states: Vec<_> = (0..4)
            .map(|_| {
                let mut st = ObserverState::new(l.s().clone(), l.flow(t).unwrap());
                st.anchor = Tick::from_seconds(t).unwrap();
                st
            })
            .collect();
        let d = observer_derivatives(&states, &g, &l, 3.0, 3.0, t).unwrap();
        for (st, di) in states.iter().zip(&d) {
            assert!(di.ds.norm() < 1e-15);
            assert!((&di.dv - l.s() * &st.v_hat).norm() < 1e-12);
        }
    }

    #[test]
    fn single_pinned_follower() {
        let l = leader();
        let g = Graph::new(1, &[], &[0]).unwrap();
        let mut st = ObserverState::new(rotation(), Vector::from_vec(vec![0.1, 0.4]));
        st.v_hat = Vector::from_vec(vec![0.3, -0.2]);
        let t = 0.7;
        let d = observer_derivatives(&[st.clone()], &g, &l, 3.0, 2.0, t).unwrap();
        assert!(d[0].ds.norm() < 1e-15);
        let vbar = st.held_leader_estimate(t).unwrap();
        let expected = rotation() * &st.v_hat + (l.flow(t).unwrap() - vbar) * 2.0;
        assert!((&d[0].dv - expected).norm() < 1e-14);
    }

    #[test]
    fn only_pinned_agent_moves_at_start() {
        let l = leader();
        let g = Graph::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], &[0]).unwrap();
        let states = vec![ObserverState::zero(2); 4];
        let d = observer_derivatives(&states, &g, &l, 3.0, 3.0, 0.0).unwrap();
        assert!((&d[0].ds - l.s() * 3.0).norm() < 1e-15);
        for di in &d[1..] {
            assert_eq!(di.ds.norm(), 0.0);
            assert_eq!(di.dv.norm(), 0.0);
        }
        // v̂₁ is pulled toward v(0) = [0.9, -0.5]
        assert!((&d[0].dv - l.v0() * 3.0).norm() < 1e-15);
    }

    #[test]
    fn trigger_holds_at_anchor() {
        let grid = Grid::from_seconds(0.01, 0.0).unwrap();
        let mut st = ObserverState::zero(2);
        st.anchor = Tick::from_seconds(0.2).unwrap();
        let d = petm_a_evaluate(&st, &cfg(CombineMode::And), &grid, st.anchor).unwrap();
        assert!(!d.fire);
        let thr = 2.0 * (-0.2f64).exp();
        assert!((d.f_s + thr).abs() < 1e-15 && (d.f_v + thr).abs() < 1e-15);
    }

    #[test]
    fn trigger_boundary_is_strict() {
        let grid = Grid::from_seconds(0.01, 0.0).unwrap();
        let mut st = ObserverState::zero(2);
        let tau = Tick::from_seconds(0.5).unwrap();
        let thr = 2.0 * (-0.5f64).exp();
        st.v_hat = Vector::from_vec(vec![thr, 0.0]);
        st.s_hat = Matrix::from_element(2, 2, 10.0);
        let d = petm_a_evaluate(&st, &cfg(CombineMode::Or), &grid, tau).unwrap();
        assert_eq!(d.f_v, 0.0);
        // f_S > 0 alone fires under OR but not under AND
        assert!(d.fire);
        let d = petm_a_evaluate(&st, &cfg(CombineMode::And), &grid, tau).unwrap();
        assert!(!d.fire);
        st.v_hat[0] = thr * 1.001;
        assert!(
            petm_a_evaluate(&st, &cfg(CombineMode::And), &grid, tau)
                .unwrap()
                .fire
        );
    }

    #[test]
    fn trigger_rejects_off_grid() {
        let grid = Grid::from_seconds(0.01, 0.0).unwrap();
        let st = ObserverState::zero(2);
        let off = Tick::from_seconds(0.015).unwrap();
        assert!(petm_a_evaluate(&st, &cfg(CombineMode::And), &grid, off).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PetmAConfig::new(0.0, 1.0, 1.0, 1.0, CombineMode::And).is_err());
        assert!(PetmAConfig::new(1.0, 1.0, 1.0, -1.0, CombineMode::Or).is_err());
    }

    #[test]
    fn replay_gaps_are_grid_multiples() {
        let grid = Grid::from_seconds(0.01, 0.0).unwrap();
        let samples: Vec<_> = (0..500u64)
            .map(|k| {
                let t = k as f64 * 0.01;
                (
                    Tick(k * grid.period),
                    Matrix::from_element(2, 2, (t * 3.0).sin()),
                    Vector::from_vec(vec![t.cos(), (2.0 * t).sin()]),
                )
            })
            .collect();
        let c = PetmAConfig::new(0.1, 0.2, 0.1, 0.2, CombineMode::Or).unwrap();
        let fired = replay_petm_a(&samples, &c, &grid).unwrap();
        assert!(fired.len() > 2);
        for w in fired.windows(2) {
            let gap = w[1].0 - w[0].0;
            assert!(gap >= grid.period && gap % grid.period == 0);
        }
    }
}
