use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `theta(s) = sigma(s) / (sigma(s) + sigma(1 - s))` with `sigma(s) = exp(-1/s)`:
/// a C-infinity step from 0 to 1 on `[0, 1]` whose derivatives of every order
/// vanish at both ends.
pub fn theta(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / s - 1.0 / (1.0 - s)).exp())
    }
}

/// `theta'(s) = theta (1 - theta) (1/s^2 + 1/(1-s)^2)`, peaking at `2` for `s = 1/2`.
pub fn theta_prime(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let t = theta(s);
    t * (1.0 - t) * (1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s)))
}

/// Largest value of `theta'`.
pub const THETA_PRIME_MAX: f64 = 2.0;

/// `value(t) = v0 + (v1 - v0) theta(t / duration)` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "smooth")]
pub struct SmoothRamp {
    #[serde(rename = "from")]
    pub v0: f64,
    #[serde(rename = "to")]
    pub v1: f64,
    pub duration: f64,
}

impl SmoothRamp {
    /// The shortest ramp whose rate never exceeds `kappa`:
    /// `duration = 2 |v1 - v0| / kappa`.
    pub fn new(v0: f64, v1: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid(format!("rate bound must be positive, got {kappa}")));
        }
        Ok(Self { v0, v1, duration: THETA_PRIME_MAX * (v1 - v0).abs() / kappa })
    }

    pub fn with_duration(v0: f64, v1: f64, duration: f64) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(invalid(format!("ramp duration must be >= 0, got {duration}")));
        }
        if duration == 0.0 && v0 != v1 {
            return Err(invalid("a ramp between different values needs a positive duration"));
        }
        Ok(Self { v0, v1, duration })
    }

    pub fn constant(v: f64, duration: f64) -> Self {
        Self { v0: v, v1: v, duration }
    }

    pub fn is_constant(&self) -> bool {
        self.v0 == self.v1
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.v0 == self.v1 {
            return self.v0;
        }
        if self.duration <= 0.0 {
            return self.v1;
        }
        let th = theta(t / self.duration);
        if th == 1.0 {
            self.v1
        } else {
            self.v0 + (self.v1 - self.v0) * th
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.v0 == self.v1 || self.duration <= 0.0 {
            return 0.0;
        }
        (self.v1 - self.v0) * theta_prime(t / self.duration) / self.duration
    }

    /// Largest `|value'|`.
    pub fn max_rate(&self) -> f64 {
        if self.v0 == self.v1 {
            0.0
        } else {
            THETA_PRIME_MAX * (self.v1 - self.v0).abs() / self.duration
        }
    }

    /// The same ramp run backwards: `reversed.value(t) = value(duration - t)`.
    pub fn reversed(&self) -> Self {
        Self { v0: self.v1, v1: self.v0, duration: self.duration }
    }

    pub fn stretched(&self, duration: f64) -> Self {
        Self { duration, ..*self }
    }
}

/// Shorthand for [`SmoothRamp::new`].
pub fn smooth_ramp(v0: f64, v1: f64, kappa: f64) -> Result<SmoothRamp> {
    SmoothRamp::new(v0, v1, kappa)
}
