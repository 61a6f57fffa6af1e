use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform time grid `0 = t_0 < ... < t_M = T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    /// Grid with spacing as close to `h` as an integer step count allows.
    pub fn with_step(horizon: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid(format!("step must be positive, got {h}")));
        }
        Self::new(horizon, ((horizon / h).round() as usize).max(1))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// Index of the node at time `t`, if `t` lies on the grid.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let pos = t / self.step();
        let k = pos.round();
        if (pos - k).abs() < 1e-9 && k >= 0.0 && k as usize <= self.steps {
            Some(k as usize)
        } else {
            None
        }
    }
}
