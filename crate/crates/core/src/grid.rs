use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Grid(format!(
                "time step {dt} must be positive and finite"
            )));
        }
        if len == 0 {
            return Err(Error::Grid("time grid must have at least one point".into()));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid from `t0` covering `[t0, t0 + t_span]` inclusive (rounded to whole steps).
    pub fn spanning(t0: f64, dt: f64, t_span: f64) -> Result<Self> {
        let steps = (t_span / dt).round();
        if !(steps >= 0.0) {
            return Err(Error::Grid(format!("span {t_span} must be non-negative")));
        }
        Self::new(t0, dt, steps as usize + 1)
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.t(k)).collect()
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            len: len.min(self.len),
            ..*self
        }
    }

    pub fn with_len(&self, len: usize) -> Self {
        Self { len, ..*self }
    }
}
