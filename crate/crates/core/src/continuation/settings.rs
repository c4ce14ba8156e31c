use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step control, tolerances and termination thresholds for branch tracing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSettings {
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Bound on the augmented residual (`gram_h` norm of `phi` with the sphere defect).
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// A branch with `sqrt(eps^2 + lambda^2)` beyond this radius counts as unbounded.
    pub escape_radius: f64,
    pub loop_tol: f64,
    pub min_loop_steps: usize,
    pub max_steps: usize,
    pub branch_point_tol: f64,
    /// Finite-difference step for `DN` when no analytic derivative exists.
    pub fd_step: Option<f64>,
    pub rank_rel_tol: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            h0: 0.05,
            h_min: 1e-6,
            h_max: 0.25,
            newton_tol: 1e-10,
            newton_max_iter: 12,
            escape_radius: 10.0,
            loop_tol: 1e-6,
            min_loop_steps: 10,
            max_steps: 20_000,
            branch_point_tol: 1e-6,
            fd_step: None,
            rank_rel_tol: 1e-8,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h_min", self.h_min),
            ("newton_tol", self.newton_tol),
            ("escape_radius", self.escape_radius),
            ("loop_tol", self.loop_tol),
            ("branch_point_tol", self.branch_point_tol),
            ("rank_rel_tol", self.rank_rel_tol),
        ];
        for (name, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.h_min <= self.h0 && self.h0 <= self.h_max) {
            return Err(Error::InvalidInput(format!(
                "need h_min <= h0 <= h_max, got {} / {} / {}",
                self.h_min, self.h0, self.h_max
            )));
        }
        if self.rank_rel_tol >= 1.0 {
            return Err(Error::InvalidInput("rank_rel_tol must be below 1".into()));
        }
        if let Some(h) = self.fd_step {
            if h.is_nan() || h <= 0.0 {
                return Err(Error::InvalidInput(format!("fd_step must be positive, got {h}")));
            }
        }
        if self.newton_max_iter == 0 || self.max_steps == 0 {
            return Err(Error::InvalidInput("iteration caps must be nonzero".into()));
        }
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("override '{assignment}' is not KEY=VALUE")))?;
        let (key, value) = (key.trim(), value.trim());
        let real = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{key}: '{value}' is not a number")))
        };
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("{key}: '{value}' is not a count")))
        };
        match key {
            "h0" => self.h0 = real()?,
            "h_min" => self.h_min = real()?,
            "h_max" => self.h_max = real()?,
            "newton_tol" => self.newton_tol = real()?,
            "newton_max_iter" => self.newton_max_iter = count()?,
            "escape_radius" | "R_max" => self.escape_radius = real()?,
            "loop_tol" => self.loop_tol = real()?,
            "min_loop_steps" => self.min_loop_steps = count()?,
            "max_steps" => self.max_steps = count()?,
            "branch_point_tol" => self.branch_point_tol = real()?,
            "fd_step" => self.fd_step = if value == "auto" { None } else { Some(real()?) },
            "rank_rel_tol" => self.rank_rel_tol = real()?,
            other => return Err(Error::InvalidInput(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }
}
