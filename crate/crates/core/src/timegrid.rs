//! Integer time base.
//!
//! Every time in the simulator is an integer count of [`TICK_SECONDS`], so
//! membership of a sampling grid is an exact modular test.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Resolution of the time base in seconds.
pub const TICK_SECONDS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub fn seconds(self) -> f64 {
        self.0 as f64 * TICK_SECONDS
    }

    /// Converts a time in seconds, requiring it to sit on the tick lattice.
    pub fn from_seconds(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("time {t} must be finite and non-negative")));
        }
        let ticks = (t / TICK_SECONDS).round();
        if (ticks * TICK_SECONDS - t).abs() > 1e-9 * t.max(1.0) {
            return Err(invalid(format!(
                "time {t} is not a multiple of the {TICK_SECONDS} s resolution"
            )));
        }
        Ok(Tick(ticks as u64))
    }
}

/// Periodic sampling grid `{phase + k·period}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub period: u64,
    pub phase: u64,
}

impl Grid {
    pub fn new(period: u64, phase: u64) -> Result<Self> {
        if period == 0 {
            return Err(invalid("sampling period must be positive"));
        }
        Ok(Self { period, phase })
    }

    pub fn from_seconds(period: f64, phase: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(invalid(format!(
                "sampling period {period} must be positive"
            )));
        }
        Self::new(Tick::from_seconds(period)?.0, Tick::from_seconds(phase)?.0)
    }

    pub fn contains(&self, t: Tick) -> bool {
        t.0 >= self.phase && (t.0 - self.phase).is_multiple_of(self.period)
    }

    pub fn period_seconds(&self) -> f64 {
        self.period as f64 * TICK_SECONDS
    }

    pub fn require(&self, t: Tick) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(invalid(format!(
                "t = {} s is not on the sampling grid (period {} s)",
                t.seconds(),
                self.period_seconds()
            )))
        }
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
