//! Joint trajectory profiles and uniform articulation-state sampling.
//!
//! Two time profiles map `t in [0, T]` to a joint value between a start and
//! an end configuration: a power law `q0 + (qf - q0) (t/T)^a` and a sigmoid
//! `q0 + (qf - q0) / (1 + e^(6 - 12 t/T))`. Either can be mirrored in time.
//! The sigmoid is used verbatim, so its endpoints miss `q0`/`qf` by
//! `1/(1+e^6)` of the range; values are not renormalized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::JointConfig;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("t = {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("profiles disagree on duration: {0} vs {1}")]
    DurationMismatch(f64, f64),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProfileKind {
    Power { exponent: f64 },
    Sigmoid,
}

/// Time profile for one joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub inverted: bool,
    pub q0: f64,
    pub qf: f64,
    pub duration: f64,
}

impl TrajectoryProfile {
    pub fn new(
        kind: ProfileKind,
        inverted: bool,
        q0: f64,
        qf: f64,
        duration: f64,
    ) -> Result<Self, TrajectoryError> {
        if let ProfileKind::Power { exponent } = kind {
            if exponent <= 0.0 {
                return Err(TrajectoryError::InvalidProfile(format!(
                    "power exponent must be positive, got {exponent}"
                )));
            }
        }
        if duration <= 0.0 {
            return Err(TrajectoryError::InvalidProfile(format!(
                "duration must be positive, got {duration}"
            )));
        }
        Ok(Self {
            kind,
            inverted,
            q0,
            qf,
            duration,
        })
    }

    /// Joint value at time `t`.
    pub fn eval(&self, t: f64) -> Result<f64, TrajectoryError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(TrajectoryError::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        let t_eff = if self.inverted { self.duration - t } else { t };
        let u = t_eff / self.duration;
        let w = match self.kind {
            ProfileKind::Power { exponent } => u.powf(exponent),
            ProfileKind::Sigmoid => 1.0 / (1.0 + (6.0 - 12.0 * u).exp()),
        };
        Ok(self.q0 + (self.qf - self.q0) * w)
    }
}

/// `n` joint configurations at evenly spaced times over `[0, T]`, endpoints
/// included: `t_i = i T / (n - 1)`.
pub fn sample_states(
    profiles: &[TrajectoryProfile],
    n: usize,
) -> Result<Vec<JointConfig>, TrajectoryError> {
    if n < 2 {
        return Err(TrajectoryError::TooFewSamples(n));
    }
    let duration = match profiles.first() {
        Some(p) => p.duration,
        None => return Ok(vec![JointConfig(Vec::new()); n]),
    };
    for p in profiles {
        if (p.duration - duration).abs() > 1e-12 {
            return Err(TrajectoryError::DurationMismatch(duration, p.duration));
        }
    }
    (0..n)
        .map(|i| {
            let t = duration * i as f64 / (n - 1) as f64;
            profiles
                .iter()
                .map(|p| p.eval(t.min(duration)))
                .collect::<Result<Vec<_>, _>>()
                .map(JointConfig)
        })
        .collect()
}
