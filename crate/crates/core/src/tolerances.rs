use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    /// Sup-norm of the discrete residual accepted as converged.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Grid-level slack on `|Du| ≤ 1`.
    pub gradient_slack: f64,
    /// Relative slack on nonnegative second differences.
    pub convexity_slack: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            newton_tol: 1e-8,
            max_iters: 100,
            gradient_slack: 1e-2,
            convexity_slack: 1e-8,
        }
    }
}

impl SolverTolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, "must be positive"))
            }
        };
        positive("newton_tol", self.newton_tol)?;
        positive("gradient_slack", self.gradient_slack)?;
        positive("convexity_slack", self.convexity_slack)?;
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be positive"));
        }
        Ok(())
    }
}
