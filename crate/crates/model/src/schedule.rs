//! Warmup, plateau and linear cooldown learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

pub const LR_START: f64 = 1e-7;
pub const LR_PEAK: f64 = 2e-4;
pub const WARMUP_STEPS: u64 = 5_000;
pub const PLATEAU_END: u64 = 65_000;
/// Total of the full-size schedule used to scale shorter runs: the plateau
/// ends at 65/80 of the run and warmup takes 5/80.
pub const REFERENCE_TOTAL: u64 = 80_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub warmup: u64,
    pub plateau_end: u64,
    pub total: u64,
    pub start: f64,
    pub peak: f64,
}

impl LrSchedule {
    /// Fixed 5,000-step warmup and a plateau to step 65,000.
    pub fn full(total: u64) -> Result<Self> {
        let s = LrSchedule {
            warmup: WARMUP_STEPS,
            plateau_end: PLATEAU_END,
            total,
            start: LR_START,
            peak: LR_PEAK,
        };
        if total <= PLATEAU_END {
            return Err(ModelError::Config(format!(
                "the full schedule needs more than {PLATEAU_END} steps, got {total}"
            )));
        }
        Ok(s)
    }

    /// All three segments shrunk in proportion to `total`.
    pub fn scaled(total: u64) -> Result<Self> {
        let warmup = (total * WARMUP_STEPS / REFERENCE_TOTAL).max(1);
        let plateau_end = (total * PLATEAU_END / REFERENCE_TOTAL).max(warmup);
        Self::custom(warmup, plateau_end, total)
    }

    pub fn custom(warmup: u64, plateau_end: u64, total: u64) -> Result<Self> {
        let s = LrSchedule {
            warmup,
            plateau_end,
            total,
            start: LR_START,
            peak: LR_PEAK,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup <= self.plateau_end && self.plateau_end < self.total) {
            return Err(ModelError::Config(format!(
                "schedule needs warmup <= plateau end < total, got {} / {} / {}",
                self.warmup, self.plateau_end, self.total
            )));
        }
        if !(self.start >= 0.0 && self.start <= self.peak) {
            return Err(ModelError::Config("schedule needs 0 <= start <= peak".into()));
        }
        Ok(())
    }

    pub fn at(&self, step: u64) -> f64 {
        if step < self.warmup {
            self.start + (self.peak - self.start) * step as f64 / self.warmup as f64
        } else if step <= self.plateau_end {
            self.peak
        } else if step < self.total {
            self.peak * (self.total - step) as f64 / (self.total - self.plateau_end) as f64
        } else {
            0.0
        }
    }
}
