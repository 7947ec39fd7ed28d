//! The vanishing-discount loop: solve the discounted problem along
//! `δ_k → 0`, read off `λ_k = δ_k·u(x_k)` at the nodal minimizer, and keep
//! the normalized field `u − u(x_k)`.

use serde::{Deserialize, Serialize};

use crate::calculus::gradient_central;
use crate::cost::CostFunction;
use crate::direct::{solve_constrained, DiscountSolution};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::penalty::{continuation_from, PenaltyConfig, PenaltyDiagnostics};
use crate::scheme::upwind_norm;
use crate::tolerances::SolverTolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Direct,
    Penalty(PenaltyConfig),
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::Direct => "direct",
            Backend::Penalty(_) => "penalty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountConfig {
    /// Strictly decreasing discount factors.
    pub schedule: Vec<f64>,
    pub backend: Backend,
    /// Used by the direct backend; the penalty backend reads its own.
    pub tolerances: SolverTolerances,
    /// Stop once `|λ_k − λ_{k−1}| ≤ lambda_rel_tol·(1 + |λ_k|)`.
    pub lambda_rel_tol: f64,
    /// Free-boundary nodes satisfy centered `|D_h u*| < 1 − edge_slack`.
    pub edge_slack: f64,
}

impl Default for DiscountConfig {
    fn default() -> Self {
        Self {
            schedule: dyadic_schedule(24),
            backend: Backend::Direct,
            tolerances: SolverTolerances::default(),
            lambda_rel_tol: 1e-4,
            edge_slack: 1e-6,
        }
    }
}

/// `δ_k = 2^{−k}` for `k = 0..=k_max`.
pub fn dyadic_schedule(k_max: u32) -> Vec<f64> {
    (0..=k_max).map(|k| 0.5f64.powi(k as i32)).collect()
}

impl DiscountConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.len() < 2 {
            return Err(invalid("schedule", "needs at least two discount factors"));
        }
        if self.schedule.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(invalid("schedule", "entries must be positive"));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("schedule", "must be strictly decreasing"));
        }
        if self.lambda_rel_tol.is_nan() || self.lambda_rel_tol <= 0.0 {
            return Err(invalid("lambda_rel_tol", "must be positive"));
        }
        if !(self.edge_slack >= 0.0 && self.edge_slack < 1.0) {
            return Err(invalid("edge_slack", "must lie in [0, 1)"));
        }
        self.tolerances.validate()?;
        if let Backend::Penalty(p) = &self.backend {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStep {
    pub delta: f64,
    pub lambda: f64,
    /// Policy or Newton iterations spent at this `δ`.
    pub iterations: usize,
    pub argmin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub lambda_star: f64,
    /// `2λ_k − λ_{k−1}`, reported beside `lambda_star`, never substituted.
    pub richardson: f64,
    /// `u − u(x_δ)` at the last `δ`; its minimum is 0.
    pub u_star: ScalarField,
    pub free_boundary: Vec<bool>,
    pub history: Vec<DeltaStep>,
    /// Set when successive `λ` increments stop shrinking.
    pub non_cauchy: bool,
    pub backend: String,
    /// The discounted solution at the last `δ`.
    pub last: DiscountSolution,
    /// Penalty diagnostics at the last `δ`, for the penalty backend.
    pub penalty: Option<PenaltyDiagnostics>,
    /// `(λ_−, λ_+)` once certified.
    pub certificate: Option<(f64, f64)>,
}

impl EigenSolution {
    pub fn grid(&self) -> &Grid {
        self.u_star.grid()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.history.iter().map(|s| s.lambda).collect()
    }

    /// Largest `|x|` over free-boundary nodes.
    pub fn free_boundary_radius(&self) -> f64 {
        mask_radius(self.grid(), &self.free_boundary)
    }
}

pub(crate) fn mask_radius(grid: &Grid, mask: &[bool]) -> f64 {
    (0..grid.len())
        .filter(|&k| mask[k])
        .map(|k| grid.radius(k))
        .fold(0.0, f64::max)
}

/// Solves one discounted problem with the penalty backend and marks the
/// nodes where the penalty is engaged.
fn penalty_step(
    f: &CostFunction,
    delta: f64,
    grid: &Grid,
    config: &PenaltyConfig,
    warm: Option<&ScalarField>,
    first_level: usize,
) -> Result<(DiscountSolution, PenaltyDiagnostics)> {
    let (v, diag) = continuation_from(f, delta, grid, config, warm, first_level)?;
    let c = v.min();
    let w: Vec<f64> = v.values().iter().map(|x| x - c).collect();
    let active = (0..grid.len())
        .map(|k| !grid.is_boundary(k) && upwind_norm(&w, grid, k) > 1.0)
        .collect();
    let iterations = diag.levels.iter().map(|l| l.newton_iterations).sum();
    Ok((
        DiscountSolution::from_field(f, delta, v, active, iterations, true),
        diag,
    ))
}

/// Solves the discounted problem at one `δ` with the configured backend.
pub fn solve_discounted(
    f: &CostFunction,
    delta: f64,
    grid: &Grid,
    config: &DiscountConfig,
) -> Result<DiscountSolution> {
    match &config.backend {
        Backend::Direct => solve_constrained(f, delta, grid, &config.tolerances, None),
        Backend::Penalty(p) => Ok(penalty_step(f, delta, grid, p, None, 0)?.0),
    }
}

/// Runs the vanishing-discount loop along `config.schedule`.
///
/// Each `δ` is warm-started from the previous field shifted by
/// `λ(1/δ_new − 1/δ_old)`. The penalty backend resumes its `ε` schedule at
/// the level where the previous `δ` stopped.
pub fn run_vanishing_discount(
    f: &CostFunction,
    grid: &Grid,
    config: &DiscountConfig,
) -> Result<EigenSolution> {
    config.validate()?;
    if f.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cost has dimension {} but grid has dimension {}",
            f.dim(),
            grid.dim()
        )));
    }
    let mut history: Vec<DeltaStep> = Vec::new();
    let mut prev: Option<DiscountSolution> = None;
    let mut level = 0;
    let mut penalty = None;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    for &delta in &config.schedule {
        let warm = prev
            .as_ref()
            .map(|p| p.u.add_constant(p.lambda / delta - p.lambda / p.delta));
        let sol = match &config.backend {
            Backend::Direct => {
                solve_constrained(f, delta, grid, &config.tolerances, warm.as_ref())?
            }
            Backend::Penalty(p) => {
                let (sol, diag) = penalty_step(f, delta, grid, p, warm.as_ref(), level)?;
                level += diag.final_level().unwrap_or(0);
                penalty = Some(diag);
                sol
            }
        };
        history.push(DeltaStep {
            delta,
            lambda: sol.lambda,
            iterations: sol.iterations,
            argmin: sol.argmin,
        });
        prev = Some(sol);
        if let [.., a, b] = history.as_slice() {
            last_change = (b.lambda - a.lambda).abs();
            if last_change <= config.lambda_rel_tol * (1.0 + b.lambda.abs()) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::DiscountNotConverged {
            last_change,
            tolerance: config.lambda_rel_tol,
        });
    }
    let last = prev.expect("schedule has at least two entries");
    let n = history.len();
    let lambda_star = history[n - 1].lambda;
    let richardson = 2.0 * lambda_star - history[n - 2].lambda;
    let u_star = last.u.add_constant(-last.u.get(last.argmin));
    let free_boundary = free_boundary(&u_star, config.edge_slack)?;
    Ok(EigenSolution {
        lambda_star,
        richardson,
        u_star,
        free_boundary,
        non_cauchy: is_non_cauchy(&history),
        backend: config.backend.label().to_string(),
        history,
        last,
        penalty,
        certificate: None,
    })
}

/// True when some increment `|λ_k − λ_{k−1}|` exceeds the one before it.
fn is_non_cauchy(history: &[DeltaStep]) -> bool {
    let inc: Vec<f64> = history
        .windows(2)
        .map(|w| (w[1].lambda - w[0].lambda).abs())
        .collect();
    inc.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-14)
}

/// Interior nodes where centered `|D_h u| < 1 − edge_slack`.
pub fn free_boundary(u_star: &ScalarField, edge_slack: f64) -> Result<Vec<bool>> {
    let grid = u_star.grid();
    let grad = gradient_central(u_star);
    let mask: Vec<bool> = (0..grid.len())
        .map(|k| !grid.is_boundary(k) && grad.norm(k) < 1.0 - edge_slack)
        .collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyFreeBoundary);
    }
    Ok(mask)
}

/// `|δu(x₀) − δu(y₀)|` for two nodes.
pub fn base_point_insensitivity(sol: &DiscountSolution, x0: usize, y0: usize) -> f64 {
    sol.delta * (sol.u.get(x0) - sol.u.get(y0)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        let mut c = DiscountConfig::default();
        assert!(c.validate().is_ok());
        c.schedule = vec![1.0];
        assert!(c.validate().is_err());
        c.schedule = vec![1.0, 1.0];
        assert!(c.validate().is_err());
        assert_eq!(dyadic_schedule(3), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn non_cauchy_flag() {
        let step = |lambda| DeltaStep {
            delta: 1.0,
            lambda,
            iterations: 0,
            argmin: 0,
        };
        let good: Vec<_> = [1.0, 1.5, 1.75, 1.875].into_iter().map(step).collect();
        assert!(!is_non_cauchy(&good));
        let bad: Vec<_> = [1.0, 1.5, 1.6, 2.0].into_iter().map(step).collect();
        assert!(is_non_cauchy(&bad));
    }

    #[test]
    fn base_point_is_symmetric_and_zero_on_diagonal() {
        let g = Grid::new(1, 3.0, 61).unwrap();
        let f = CostFunction::quadratic(1).unwrap();
        let sol = solve_constrained(&f, 1e-3, &g, &SolverTolerances::default(), None).unwrap();
        assert_eq!(base_point_insensitivity(&sol, 10, 10), 0.0);
        let a = base_point_insensitivity(&sol, 10, 50);
        assert_eq!(a, base_point_insensitivity(&sol, 50, 10));
        assert!(a < 1e-12, "{a}");
    }
}
