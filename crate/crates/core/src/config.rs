//! Thresholds and grids shared by orbit verdicts and the chaos classifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityConfig, DensityError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("invalid chaos config: {0}")]
    Chaos(String),
}

/// Finite-horizon surrogates for the exact 0/1 density statements.
///
/// A density estimate `≤ theta0` counts as zero, `≥ 1 − theta1` as one and
/// `≥ theta_plus` as positive. All comparisons are non-strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosConfig {
    pub density: DensityConfig,
    pub sigma_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    pub theta0: f64,
    pub theta1: f64,
    pub theta_plus: f64,
    pub gamma: f64,
    pub growth: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

impl Default for ChaosConfig {
    fn default() -> Self {
        let grid = log_grid(1e-6, 1e2, 16);
        ChaosConfig {
            density: DensityConfig::default(),
            sigma_grid: grid.clone(),
            epsilon_grid: grid,
            theta0: 0.05,
            theta1: 0.05,
            theta_plus: 0.05,
            gamma: 0.1,
            growth: 1e6,
        }
    }
}

impl ChaosConfig {
    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.density.horizon = horizon;
        self
    }

    /// Grids and growth level multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        ChaosConfig {
            sigma_grid: self.sigma_grid.iter().map(|s| s * c).collect(),
            epsilon_grid: self.epsilon_grid.iter().map(|s| s * c).collect(),
            growth: self.growth * c,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.density.validate()?;
        let bad = |m: &str| Err(ConfigError::Chaos(m.to_string()));
        for (name, g) in [("sigma_grid", &self.sigma_grid), ("epsilon_grid", &self.epsilon_grid)] {
            if g.is_empty() {
                return bad(&format!("{name} is empty"));
            }
            if !g.iter().all(|v| v.is_finite() && *v > 0.0) || !g.windows(2).all(|w| w[0] < w[1]) {
                return bad(&format!("{name} must be positive and strictly increasing"));
            }
        }
        for (name, t) in [("theta0", self.theta0), ("theta1", self.theta1), ("theta_plus", self.theta_plus)] {
            if !(0.0..=1.0).contains(&t) {
                return bad(&format!("{name} must lie in [0,1]"));
            }
        }
        if self.theta0 + self.theta_plus > 1.0 {
            return bad("theta0 + theta_plus must not exceed 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0,1]");
        }
        if !(self.growth > 0.0 && self.growth.is_finite()) {
            return bad("growth level must be positive");
        }
        Ok(())
    }

    /// The grid used by the "for each ε > 0" clauses.
    pub fn epsilon_min(&self) -> f64 {
        self.epsilon_grid[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_grid[0]
    }

    /// True when the two grids coincide, which lets `U(σ)` be read off as the complement of `L(σ)`.
    pub fn grids_coincide(&self) -> bool {
        self.sigma_grid == self.epsilon_grid
    }
}
