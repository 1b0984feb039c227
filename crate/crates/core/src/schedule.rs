use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes `α^k = c_α/k`, `β^k = c_β/k^τβ` and
/// `γ^k = c_γ / (√k · √max(log log k, log log k_guard))`.
///
/// Iterations are indexed from `k = 1`. The guard only changes `γ^k` for
/// `k < k_guard`, where `log log k` is undefined or non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub tau_beta: f64,
    #[serde(default = "default_k_guard")]
    pub k_guard: usize,
    /// Upper clamp on `β^k`, usually `0.49 / max degree` of the graph model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_cap: Option<f64>,
}

fn default_k_guard() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    Alpha,
    Beta,
    Gamma,
}

impl Default for ScheduleSet {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            c_beta: 0.4,
            c_gamma: 1.0,
            tau_beta: 0.25,
            k_guard: 3,
            beta_cap: None,
        }
    }
}

impl ScheduleSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_alpha", self.c_alpha), ("c_beta", self.c_beta), ("c_gamma", self.c_gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("schedule.{name}"), format!("must be positive, got {v}")));
            }
        }
        if !(self.tau_beta > 0.0 && self.tau_beta < 0.5) {
            return Err(Error::config(
                "schedule.tau_beta",
                format!("must lie in (0, 1/2), got {}", self.tau_beta),
            ));
        }
        if self.k_guard < 3 {
            return Err(Error::config(
                "schedule.k_guard",
                format!("must be at least 3, got {}", self.k_guard),
            ));
        }
        if let Some(cap) = self.beta_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(Error::config("schedule.beta_cap", format!("must be positive, got {cap}")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.c_alpha / k as f64
    }

    pub fn beta(&self, k: usize) -> f64 {
        let raw = self.c_beta / (k as f64).powf(self.tau_beta);
        match self.beta_cap {
            Some(cap) => raw.min(cap),
            None => raw,
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        let kf = k as f64;
        let guard = (self.k_guard as f64).ln().ln();
        let loglog = if k >= self.k_guard { kf.ln().ln().max(guard) } else { guard };
        self.c_gamma / (kf.sqrt() * loglog.sqrt())
    }

    pub fn eval(&self, k: usize, which: StepSize) -> Result<f64> {
        if k < 1 {
            return Err(Error::InvalidParameter("step sizes are defined for k >= 1".into()));
        }
        Ok(match which {
            StepSize::Alpha => self.alpha(k),
            StepSize::Beta => self.beta(k),
            StepSize::Gamma => self.gamma(k),
        })
    }

    pub fn with_beta_cap(mut self, cap: Option<f64>) -> Self {
        self.beta_cap = cap;
        self
    }
}
