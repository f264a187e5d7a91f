use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total time `tau` (ħ = 1), a piecewise-linear path `s ↦ u` over
/// normalized time, and the number of integration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    tau: f64,
    path: Vec<(f64, f64)>,
    steps: usize,
}

impl AnnealSchedule {
    /// Linear ramp `u = t / tau`.
    pub fn linear(tau: f64, steps: usize) -> Result<Self> {
        Self::with_path(tau, steps, vec![(0.0, 0.0), (1.0, 1.0)])
    }

    /// `breakpoints` are `(s, u)` pairs with strictly increasing `s`, starting
    /// at `(0, 0)`, ending at `(1, 1)` and nondecreasing in `u`.
    pub fn with_path(tau: f64, steps: usize, breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("anneal time must be positive, got {tau}")));
        }
        if steps == 0 {
            return Err(Error::invalid("need at least one integration step"));
        }
        if breakpoints.len() < 2 || breakpoints[0] != (0.0, 0.0) || *breakpoints.last().unwrap() != (1.0, 1.0) {
            return Err(Error::invalid("path must run from (0, 0) to (1, 1)"));
        }
        for w in breakpoints.windows(2) {
            let ((s0, u0), (s1, u1)) = (w[0], w[1]);
            if !(s1 > s0) || u1 < u0 || !u1.is_finite() {
                return Err(Error::invalid(format!(
                    "path breakpoints ({s0}, {u0}) -> ({s1}, {u1}) are not increasing in time and monotone in u"
                )));
            }
        }
        Ok(Self {
            tau,
            path: breakpoints,
            steps,
        })
    }

    /// Linear ramp interrupted by a plateau at `u_pause` lasting the fraction
    /// `pause` of the total time, placed so both ramps share one slope.
    pub fn with_pause(tau: f64, steps: usize, u_pause: f64, pause: f64) -> Result<Self> {
        if !(0.0 < u_pause && u_pause < 1.0) || !(0.0 < pause && pause < 1.0) {
            return Err(Error::invalid(
                "pause position and length must lie strictly inside (0, 1)",
            ));
        }
        let start = u_pause * (1.0 - pause);
        Self::with_path(
            tau,
            steps,
            vec![(0.0, 0.0), (start, u_pause), (start + pause, u_pause), (1.0, 1.0)],
        )
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn path(&self) -> &[(f64, f64)] {
        &self.path
    }

    /// Interpolation parameter at normalized time `s ∈ [0, 1]`.
    pub fn u_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let k = self
            .path
            .partition_point(|&(sk, _)| sk <= s)
            .clamp(1, self.path.len() - 1);
        let ((s0, u0), (s1, u1)) = (self.path[k - 1], self.path[k]);
        if s >= s1 {
            return u1;
        }
        (u0 + (u1 - u0) * (s - s0) / (s1 - s0)).clamp(0.0, 1.0)
    }

    /// Same path and time with a different step count.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::with_path(self.tau, steps, self.path.clone())
    }
}
