use std::collections::BTreeMap;

use serde::Serialize;

use super::{Channel, EventLog, Trajectory};
use crate::error::{invalid, Result};
use crate::timegrid::{Tick, TICK_SECONDS};

/// Inter-event statistics of one channel, pooled over its streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamStats {
    pub count: usize,
    /// `None` when no stream has two events.
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Every event lies on its grid and every gap is a whole number of periods.
    pub multiples_of_period: bool,
}

/// Broadcast count over one edge, with 1-based agent ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCount {
    pub from: usize,
    pub to: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub t_end: f64,
    pub tail_window: f64,
    /// Largest over followers of the time-averaged `‖eᵢ‖` in the tail window.
    pub tail_error: f64,
    /// Largest `‖eᵢ(t)‖` anywhere in the tail window.
    pub tail_error_peak: f64,
    pub tail_s_error: f64,
    pub tail_v_error: f64,
    pub petm_a: StreamStats,
    pub petm_b: StreamStats,
    pub petm_c: StreamStats,
    pub petm_a_edges: Vec<EdgeCount>,
    /// Sensor transmissions per follower.
    pub petm_b_agents: Vec<usize>,
    /// Actuator transmissions per follower.
    pub petm_c_agents: Vec<usize>,
}

fn stream_stats(log: &EventLog, channel: Channel) -> StreamStats {
    let mut streams: BTreeMap<(usize, usize), Vec<Tick>> = BTreeMap::new();
    for r in log.records.iter().filter(|r| r.channel == channel) {
        streams
            .entry((r.src_agent, r.agent))
            .or_default()
            .push(r.at);
    }
    let mut count = 0;
    let mut gaps = Vec::new();
    let mut multiples = true;
    for (&(src, _), times) in &streams {
        count += times.len();
        let period = log.period_of(channel, src);
        let phase = log.phase_of(channel, src);
        // the t = 0 transmission is unconditional and need not sit on a shifted grid
        let on_grid = |t: Tick| t.0 >= phase && (t.0 - phase).is_multiple_of(period);
        if times.iter().any(|&t| t.0 != 0 && !on_grid(t)) {
            multiples = false;
        }
        for pair in times.windows(2) {
            let gap = pair[1].0.saturating_sub(pair[0].0);
            if gap == 0 || (pair[0].0 != 0 || phase == 0) && gap % period != 0 {
                multiples = false;
            }
            gaps.push(gap);
        }
    }
    let min_gap = gaps.iter().min().map(|&g| g as f64 * TICK_SECONDS);
    let mean_gap = (!gaps.is_empty())
        .then(|| gaps.iter().sum::<u64>() as f64 / gaps.len() as f64 * TICK_SECONDS);
    StreamStats {
        count,
        min_gap,
        mean_gap,
        multiples_of_period: multiples,
    }
}

fn per_agent(log: &EventLog, channel: Channel, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for r in log.records.iter().filter(|r| r.channel == channel) {
        out[r.agent] += 1;
    }
    out
}

/// Summarizes a run. The tail window covers the samples with
/// `t ≥ t_end − tail_window`.
pub fn compute_metrics(traj: &Trajectory, log: &EventLog, tail_window: f64) -> Result<Metrics> {
    let (Some(&first), Some(&last)) = (traj.times.first(), traj.times.last()) else {
        return Err(invalid("empty trajectory"));
    };
    let span = (last.0 - first.0) as f64 * TICK_SECONDS;
    if !(tail_window >= 0.0) || tail_window >= span {
        return Err(invalid(format!(
            "tail window {tail_window} s must be shorter than the run ({span} s)"
        )));
    }
    let t_end = last.seconds();
    let start = traj
        .times
        .iter()
        .position(|t| t.seconds() >= t_end - tail_window - 1e-12)
        .unwrap_or(traj.len() - 1);
    let window = start..traj.len();
    let samples = window.len() as f64;

    let mut tail_error: f64 = 0.0;
    let mut peak: f64 = 0.0;
    let mut s_err: f64 = 0.0;
    let mut v_err: f64 = 0.0;
    for a in &traj.agents {
        let norms = a.e[window.clone()].iter().map(|e| e.norm());
        let (sum, max) = norms.fold((0.0, 0.0f64), |(s, m), n| (s + n, m.max(n)));
        tail_error = tail_error.max(sum / samples);
        peak = peak.max(max);
        s_err = s_err.max(a.s_err[window.clone()].iter().copied().fold(0.0, f64::max));
        v_err = v_err.max(a.v_err[window.clone()].iter().copied().fold(0.0, f64::max));
    }

    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in log.records.iter().filter(|r| r.channel == Channel::PetmA) {
        *edges.entry((r.src_agent, r.agent)).or_default() += 1;
    }
    let n = traj.agents.len();
    Ok(Metrics {
        t_end,
        tail_window,
        tail_error,
        tail_error_peak: peak,
        tail_s_error: s_err,
        tail_v_error: v_err,
        petm_a: stream_stats(log, Channel::PetmA),
        petm_b: stream_stats(log, Channel::PetmB),
        petm_c: stream_stats(log, Channel::PetmC),
        petm_a_edges: edges
            .into_iter()
            .map(|((from, to), count)| EdgeCount {
                from: from + 1,
                to: to + 1,
                count,
            })
            .collect(),
        petm_b_agents: per_agent(log, Channel::PetmB, n),
        petm_c_agents: per_agent(log, Channel::PetmC, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Vector;
    use crate::sim::{AgentTrace, EventRecord};

    fn log_with(times: &[u64]) -> EventLog {
        EventLog {
            records: times
                .iter()
                .map(|&t| EventRecord {
                    channel: Channel::PetmB,
                    agent: 0,
                    src_agent: 0,
                    at: Tick(t),
                })
                .collect(),
            comm_period: 10_000,
            sensor_periods: vec![10_000],
            sensor_phases: vec![0],
        }
    }

    fn flat_traj(steps: u64, err: f64) -> Trajectory {
        let n = steps as usize + 1;
        Trajectory {
            times: (0..=steps).map(|k| Tick(k * 10_000)).collect(),
            v: vec![Vector::zeros(2); n],
            agents: vec![AgentTrace {
                x: vec![Vector::zeros(2); n],
                x_hat: vec![Vector::zeros(2); n],
                e: vec![Vector::from_vec(vec![err]); n],
                y_m: vec![Vector::zeros(1); n],
                u: vec![Vector::zeros(1); n],
                s_err: vec![0.0; n],
                v_err: vec![0.0; n],
            }],
        }
    }

    #[test]
    fn gaps_on_the_grid() {
        let s = stream_stats(&log_with(&[0, 10_000, 30_000]), Channel::PetmB);
        assert_eq!(s.count, 3);
        assert!((s.min_gap.unwrap() - 0.01).abs() < 1e-15);
        assert!((s.mean_gap.unwrap() - 0.015).abs() < 1e-15);
        assert!(s.multiples_of_period);
    }

    #[test]
    fn off_grid_gap_is_flagged() {
        let s = stream_stats(&log_with(&[0, 15_000]), Channel::PetmB);
        assert!(!s.multiples_of_period);
        let mut shifted = log_with(&[0, 5_000, 25_000]);
        shifted.sensor_phases = vec![5_000];
        assert!(stream_stats(&shifted, Channel::PetmB).multiples_of_period);
        let mut shifted = log_with(&[0, 5_000, 20_000]);
        shifted.sensor_phases = vec![5_000];
        assert!(!stream_stats(&shifted, Channel::PetmB).multiples_of_period);
        let s = stream_stats(&log_with(&[0]), Channel::PetmB);
        assert_eq!(s.min_gap, None);
        assert!(s.multiples_of_period);
    }

    #[test]
    fn tail_error_is_window_average() {
        let mut tr = flat_traj(100, 0.5);
        // spike outside the window does not count
        tr.agents[0].e[10] = Vector::from_vec(vec![9.0]);
        let m = compute_metrics(&tr, &log_with(&[0]), 0.5).unwrap();
        assert!((m.tail_error - 0.5).abs() < 1e-15);
        assert_eq!(m.tail_error_peak, 0.5);
        assert_eq!(m.petm_b_agents, vec![1]);
    }

    #[test]
    fn rejects_empty_or_oversized_window() {
        assert!(compute_metrics(&Trajectory::default(), &log_with(&[]), 1.0).is_err());
        assert!(compute_metrics(&flat_traj(10, 0.0), &log_with(&[]), 5.0).is_err());
    }
}
