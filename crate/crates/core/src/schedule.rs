//! Noise schedules `sigma(t)`, `beta(t) = 1 - sigma(t)` and the Euler time grid.
//!
//! A schedule is the clock of the flow: `sigma` decreases from 1 at `t = 0`
//! to 0 at the terminal time `T`, and the drift is scaled by the logarithmic
//! derivative `(log sigma)'(t)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `sigma = 1 - t`, `T = 1`.
    Linear,
    /// `sigma = (1 - t)^alpha`, `T = 1`.
    PowerDecay { alpha: f64 },
    /// `sigma = 1 - t^alpha`, `T = 1`.
    PowerRamp { alpha: f64 },
    /// `sigma = exp(-t)`, `T = inf`; integrated up to a finite horizon.
    Exponential { t_max: f64 },
}

/// Values of the schedule at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValue {
    pub sigma: f64,
    pub beta: f64,
    pub dlog_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::linear()
    }
}

impl Schedule {
    pub fn linear() -> Self {
        Self { kind: ScheduleKind::Linear }
    }

    pub fn new(kind: ScheduleKind) -> Result<Self> {
        match kind {
            ScheduleKind::Linear => {}
            ScheduleKind::PowerDecay { alpha } | ScheduleKind::PowerRamp { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!("schedule alpha must be positive, got {alpha}")));
                }
            }
            ScheduleKind::Exponential { t_max } => {
                if !(t_max > 0.0 && t_max.is_finite()) {
                    return Err(Error::invalid(format!("exponential horizon must be positive, got {t_max}")));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ScheduleKind::Linear)
    }

    /// Terminal time `T` (infinite for the exponential schedule).
    pub fn terminal(&self) -> f64 {
        match self.kind {
            ScheduleKind::Exponential { .. } => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Length of the integration interval covered by a [`TimeGrid`].
    pub fn horizon(&self) -> f64 {
        match self.kind {
            ScheduleKind::Exponential { t_max } => t_max,
            _ => 1.0,
        }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Linear => 1.0 - t,
            ScheduleKind::PowerDecay { alpha } => (1.0 - t).powf(alpha),
            ScheduleKind::PowerRamp { alpha } => 1.0 - t.powf(alpha),
            ScheduleKind::Exponential { .. } => (-t).exp(),
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<ScheduleValue> {
        if !(t >= 0.0 && t < self.terminal()) {
            return Err(Error::Domain(format!("t = {t} outside [0, {})", self.terminal())));
        }
        let sigma = self.sigma(t);
        let dlog_sigma = match self.kind {
            ScheduleKind::Linear => -1.0 / (1.0 - t),
            ScheduleKind::PowerDecay { alpha } => -alpha / (1.0 - t),
            ScheduleKind::PowerRamp { alpha } => {
                if t == 0.0 {
                    if alpha < 1.0 {
                        return Err(Error::UnboundedDerivative(format!(
                            "power-ramp alpha = {alpha} < 1 at t = 0"
                        )));
                    } else if alpha == 1.0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    -alpha * t.powf(alpha - 1.0) / (1.0 - t.powf(alpha))
                }
            }
            ScheduleKind::Exponential { .. } => -1.0,
        };
        Ok(ScheduleValue { sigma, beta: 1.0 - sigma, dlog_sigma })
    }

    /// Euler grid with `steps` nodes over this schedule's horizon.
    pub fn grid(&self, steps: usize) -> Result<TimeGrid> {
        TimeGrid::new(steps, self.horizon())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScheduleKind::Linear => write!(f, "linear"),
            ScheduleKind::PowerDecay { alpha } => write!(f, "power-decay:{alpha}"),
            ScheduleKind::PowerRamp { alpha } => write!(f, "power-ramp:{alpha}"),
            ScheduleKind::Exponential { t_max } => write!(f, "exp:{t_max}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::invalid(format!("schedule `{name}` needs a {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad schedule parameter in `{s}`: {e}")))
        };
        let kind = match name {
            "linear" if arg.is_none() => ScheduleKind::Linear,
            "power-decay" => ScheduleKind::PowerDecay { alpha: param("ALPHA")? },
            "power-ramp" => ScheduleKind::PowerRamp { alpha: param("ALPHA")? },
            "exp" => ScheduleKind::Exponential { t_max: param("TMAX")? },
            _ => return Err(Error::invalid(format!("unknown schedule `{s}`"))),
        };
        Schedule::new(kind)
    }
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Nodes `t_k = k * h`, `k = 0..M-1`, with `h = horizon / M`.
///
/// The terminal time is never a node; the last Euler step goes from
/// `t_{M-1}` to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    step: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        let m = steps as f64;
        let nodes = (0..steps).map(|k| horizon * k as f64 / m).collect();
        Ok(Self { steps, step: horizon / m, nodes })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step size `h`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Unit-horizon grid `{k/M : k = 0..M-1}`.
pub fn make_grid(steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(steps, 1.0)
}
