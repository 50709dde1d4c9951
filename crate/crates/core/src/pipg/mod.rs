//! Proportional-integral projected gradient (PIPG) for the scaled SCP
//! subproblem.
//!
//! [`pipg_custom`] runs directly on the per-interval blocks of a
//! [`ScaledSubproblem`]. [`pipg_generic`] runs the textbook iteration on an
//! explicitly materialized [`GenericQP`] and exists as a reference.

mod custom;
mod generic;
mod power;
mod stopping;
mod subproblem;
mod workspace;

pub use custom::{pipg_custom, step_sizes, PipgOutcome};
pub use generic::{pipg_generic, GenericQP, GenericState, Projection};
pub use power::{power_iteration_custom, PowerEstimate};
pub use stopping::{stopping_custom, IterateView};
pub use subproblem::ScaledSubproblem;
pub use workspace::PipgWorkspace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipgConfig {
    pub omega: f64,
    pub rho: f64,
    pub j_max: usize,
    pub j_check: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_buff: f64,
    pub power_j_max: usize,
    pub power_eps_abs: f64,
    pub power_eps_rel: f64,
}

impl Default for PipgConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            rho: 1.6,
            j_max: 2500,
            j_check: 25,
            eps_abs: 1e-9,
            eps_rel: 1e-8,
            eps_buff: 0.05,
            power_j_max: 200,
            power_eps_abs: 1e-12,
            power_eps_rel: 1e-6,
        }
    }
}

impl PipgConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("pipg.{key}"), "must be positive"))
            }
        };
        positive("omega", self.omega)?;
        if !(self.rho > 0.0 && self.rho < 2.0) {
            return Err(Error::validation("pipg.rho", "must lie in (0, 2)"));
        }
        if self.j_max == 0 {
            return Err(Error::validation("pipg.j_max", "must be at least 1"));
        }
        if self.j_check == 0 {
            return Err(Error::validation("pipg.j_check", "must be at least 1"));
        }
        if self.power_j_max == 0 {
            return Err(Error::validation("pipg.power_j_max", "must be at least 1"));
        }
        for (k, v) in [
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("eps_buff", self.eps_buff),
            ("power_eps_abs", self.power_eps_abs),
            ("power_eps_rel", self.power_eps_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("pipg.{k}"), "must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
