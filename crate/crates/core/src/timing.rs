//! Static timing constants shared by the simulator and the verifiers.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};

/// Interval bounds for node periods and per-activation jitters, in ms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingConstants {
    pub period_min: Rat,
    pub period_max: Rat,
    pub jitter_min: Rat,
    pub jitter_max: Rat,
}

impl TimingConstants {
    /// The default constants: periods in [49, 51] ms, jitter in [-0.5, 0.5] ms.
    pub fn defaults() -> Self {
        TimingConstants {
            period_min: Rat::from_int(49),
            period_max: Rat::from_int(51),
            jitter_min: Rat::new(-1, 2),
            jitter_max: Rat::new(1, 2),
        }
    }

    /// Same periods, jitter widened to [-25, 25] ms.
    pub fn wide_jitter() -> Self {
        TimingConstants {
            jitter_min: Rat::from_int(-25),
            jitter_max: Rat::from_int(25),
            ..Self::defaults()
        }
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        if !self.period_min.is_positive() {
            return Err(TimingError::NonPositivePeriod);
        }
        if self.period_min > self.period_max {
            return Err(TimingError::EmptyPeriodInterval);
        }
        if self.jitter_min > self.jitter_max {
            return Err(TimingError::EmptyJitterInterval);
        }
        // activation times must strictly increase
        if !(&self.period_min + &self.jitter_min).is_positive() {
            return Err(TimingError::NonAdvancingActivations);
        }
        Ok(())
    }
}

impl Default for TimingConstants {
    fn default() -> Self {
        Self::defaults()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimingError {
    #[error("period_min must be positive")]
    NonPositivePeriod,
    #[error("period_min exceeds period_max")]
    EmptyPeriodInterval,
    #[error("jitter_min exceeds jitter_max")]
    EmptyJitterInterval,
    #[error("period_min + jitter_min must be positive")]
    NonAdvancingActivations,
}

/// Bound convention for a node's first activation time.
///
/// The concrete network model constrains the first activation to lie within
/// one period of time zero. The timed drift model instead tracks an initial
/// clock offset that may already include one jitter, so its first firing may
/// be up to `period + jitter_max` after time zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartConvention {
    /// First activation in [0, period].
    ModelM,
    /// First activation in [0, period + jitter_max].
    ModelT,
}
