//! Penalized semilinear problem `δv − Δ_h v + β_ε(|D_h v|² − 1) = f` and its
//! continuation in `ε`.
//!
//! The discrete operators are the ones used by [`crate::direct`], so as
//! `ε → 0` the penalized solutions approach the same discrete `u_δ`.

use serde::{Deserialize, Serialize};

use crate::calculus::max_curvature;
use crate::cost::CostFunction;
use crate::direct::supersolution_shape;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scheme::{
    add_eikonal_row, add_elliptic_row, boundary_residual, laplacian_at, upwind, upwind_norm,
    StencilSystem,
};
use crate::tolerances::SolverTolerances;

/// The penalty `β_ε` and its derivative.
///
/// `β_ε(z) = 0` for `z ≤ 0`, `z²/(4ε²)` on `[0, 2ε]` and `(z − ε)/ε` beyond.
///
/// ```
/// use ergodic_hjb::penalty::beta;
/// assert_eq!(beta(-1.0, 0.1).unwrap().0, 0.0);
/// assert_eq!(beta(3.0, 1.0).unwrap().0, 2.0);
/// assert_eq!(beta(0.5, 0.5).unwrap(), (0.25, 1.0));
/// ```
pub fn beta(z: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(invalid("epsilon", "must be positive"));
    }
    Ok(beta_unchecked(z, epsilon))
}

fn beta_unchecked(z: f64, eps: f64) -> (f64, f64) {
    if z <= 0.0 {
        (0.0, 0.0)
    } else if z <= 2.0 * eps {
        (z * z / (4.0 * eps * eps), z / (2.0 * eps * eps))
    } else {
        ((z - eps) / eps, 1.0 / eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Strictly decreasing penalty parameters.
    pub epsilon_schedule: Vec<f64>,
    /// Initial Newton step length in `(0, 1]`.
    pub damping: f64,
    pub tolerances: SolverTolerances,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            epsilon_schedule: halving_schedule(1e-1, 1e-4),
            damping: 1.0,
            tolerances: SolverTolerances::default(),
        }
    }
}

/// `start, start/2, …` down to the last value above `end`, then `end`.
pub fn halving_schedule(start: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut eps = start;
    while eps > end * (1.0 + 1e-12) {
        out.push(eps);
        eps *= 0.5;
    }
    out.push(end);
    out
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if self.epsilon_schedule.is_empty() {
            return Err(invalid("epsilon_schedule", "must not be empty"));
        }
        if self
            .epsilon_schedule
            .iter()
            .any(|e| !e.is_finite() || *e <= 0.0)
        {
            return Err(invalid("epsilon_schedule", "entries must be positive"));
        }
        if self.epsilon_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilon_schedule", "must be strictly decreasing"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Measurements taken after the solve at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyLevel {
    pub epsilon: f64,
    /// `max β_ε(|D_h v|² − 1)` over interior nodes.
    pub max_penalty: f64,
    /// Largest second difference per unit length².
    pub max_curvature: f64,
    /// `max (|D_h v|² − 1)⁺` over interior nodes.
    pub gradient_excess: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyDiagnostics {
    pub levels: Vec<PenaltyLevel>,
}

impl PenaltyDiagnostics {
    /// Index of the last schedule entry that was solved.
    pub fn final_level(&self) -> Option<usize> {
        self.levels.len().checked_sub(1)
    }
}

/// Outcome of one penalized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySolution {
    pub v: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

struct Problem<'a> {
    grid: &'a Grid,
    delta: f64,
    eps: f64,
    /// `f − δc` for the shifted unknown `w = v − c`.
    rhs: Vec<f64>,
}

impl Problem<'_> {
    /// Fills `out` with the nodal residual; returns its sup-norm and squared
    /// 2-norm.
    fn residual(&self, w: &[f64], out: &mut [f64]) -> (f64, f64) {
        let mut sup = 0.0f64;
        let mut sq = 0.0;
        for (k, r) in out.iter_mut().enumerate() {
            *r = if self.grid.is_boundary(k) {
                boundary_residual(w, self.grid, k)
            } else {
                let a = upwind_norm(w, self.grid, k);
                let (b, _) = beta_unchecked(a * a - 1.0, self.eps);
                self.delta * w[k] - laplacian_at(w, self.grid, k) + b - self.rhs[k]
            };
            sup = sup.max(r.abs());
            sq += *r * *r;
        }
        (sup, sq)
    }

    fn assemble(&self, w: &[f64], system: &mut StencilSystem) {
        let h = self.grid.spacing();
        system.clear();
        for k in 0..self.grid.len() {
            if self.grid.is_boundary(k) {
                add_eikonal_row(system, w, self.grid, k);
                continue;
            }
            add_elliptic_row(system, self.grid, k, self.delta);
            let up = upwind(w, self.grid, k);
            let a2 = up[0].value.powi(2) + up[1].value.powi(2);
            let (_, db) = beta_unchecked(a2 - 1.0, self.eps);
            if db == 0.0 {
                continue;
            }
            for a in up {
                if let Some(j) = a.neighbor {
                    let c = 2.0 * db * a.value / h;
                    system.add(k, k, c);
                    system.add(k, j, -c);
                }
            }
        }
    }
}

fn check_inputs(f: &CostFunction, delta: f64, grid: &Grid) -> Result<()> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(invalid("delta", "must be positive"));
    }
    if f.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cost has dimension {} but grid has dimension {}",
            f.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Solves the penalized problem at a single `ε` by damped Newton.
///
/// The step starts at `damping` and is halved while the squared residual
/// does not decrease. Without a warm start the iteration begins from
/// `K/δ + |x|²/2 ∧ (|x| − 1/2)`.
pub fn solve_penalized(
    f: &CostFunction,
    delta: f64,
    epsilon: f64,
    grid: &Grid,
    warm_start: Option<&ScalarField>,
    damping: f64,
    tol: &SolverTolerances,
) -> Result<PenaltySolution> {
    check_inputs(f, delta, grid)?;
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(invalid("epsilon", "must be positive"));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(invalid("damping", "must lie in (0, 1]"));
    }
    tol.validate()?;
    let n = grid.len();
    let (shift, mut w) = match warm_start {
        Some(ws) => {
            if !ws.grid().same_shape(grid) {
                return Err(Error::ShapeMismatch(
                    "warm start lives on a different grid".into(),
                ));
            }
            let c = ws.min();
            (c, ws.values().iter().map(|v| v - c).collect::<Vec<_>>())
        }
        None => {
            let k = grid.dim() as f64 + f.max_on_unit_sphere();
            (
                k / delta,
                (0..n)
                    .map(|i| supersolution_shape(grid.radius(i)))
                    .collect(),
            )
        }
    };
    let problem = Problem {
        grid,
        delta,
        eps: epsilon,
        rhs: (0..n)
            .map(|k| {
                let p = grid.point(k);
                f.value(&p[..grid.dim()]) - delta * shift
            })
            .collect(),
    };

    let mut system = StencilSystem::new(*grid);
    let mut r = vec![0.0; n];
    let mut trial_r = vec![0.0; n];
    let (mut res, mut merit) = problem.residual(&w, &mut r);
    let mut iterations = 0;
    while res > tol.newton_tol {
        if !res.is_finite() {
            return Err(Error::NonFinite("penalty residual"));
        }
        if iterations >= tol.max_iters {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: res,
            });
        }
        problem.assemble(&w, &mut system);
        let step = system.solve(&r)?;
        let mut t = damping;
        let mut trial = vec![0.0; n];
        loop {
            for k in 0..n {
                trial[k] = w[k] - t * step[k];
            }
            let (trial_res, trial_merit) = problem.residual(&trial, &mut trial_r);
            if trial_merit < merit || t < 1e-6 {
                res = trial_res;
                merit = trial_merit;
                break;
            }
            t *= 0.5;
        }
        w = trial;
        std::mem::swap(&mut r, &mut trial_r);
        iterations += 1;
    }
    let v = ScalarField::new(*grid, w.iter().map(|x| x + shift).collect())?;
    Ok(PenaltySolution {
        v,
        iterations,
        residual: res,
    })
}

fn measure(v: &ScalarField, eps: f64, newton_iterations: usize) -> PenaltyLevel {
    let grid = v.grid();
    let c = v.min();
    let w: Vec<f64> = v.values().iter().map(|x| x - c).collect();
    let mut max_penalty = 0.0f64;
    let mut gradient_excess = 0.0f64;
    for k in (0..grid.len()).filter(|&k| !grid.is_boundary(k)) {
        let a = upwind_norm(&w, grid, k);
        let z = a * a - 1.0;
        max_penalty = max_penalty.max(beta_unchecked(z, eps).0);
        gradient_excess = gradient_excess.max(z);
    }
    PenaltyLevel {
        epsilon: eps,
        max_penalty,
        max_curvature: max_curvature(v),
        gradient_excess,
        newton_iterations,
    }
}

/// Runs [`solve_penalized`] along the schedule, warm-starting each level
/// from the previous one, and stops at the first level whose gradient
/// excess is within `gradient_slack`.
pub fn continuation(
    f: &CostFunction,
    delta: f64,
    grid: &Grid,
    config: &PenaltyConfig,
) -> Result<(ScalarField, PenaltyDiagnostics)> {
    continuation_from(f, delta, grid, config, None, 0)
}

/// [`continuation`] starting at schedule index `first_level` from an
/// optional warm start.
pub fn continuation_from(
    f: &CostFunction,
    delta: f64,
    grid: &Grid,
    config: &PenaltyConfig,
    warm_start: Option<&ScalarField>,
    first_level: usize,
) -> Result<(ScalarField, PenaltyDiagnostics)> {
    config.validate()?;
    check_inputs(f, delta, grid)?;
    if first_level >= config.epsilon_schedule.len() {
        return Err(invalid("first_level", "beyond the end of the schedule"));
    }
    let mut current = warm_start.cloned();
    let mut levels = Vec::new();
    let mut excess = f64::INFINITY;
    for &eps in &config.epsilon_schedule[first_level..] {
        let sol = solve_penalized(
            f,
            delta,
            eps,
            grid,
            current.as_ref(),
            config.damping,
            &config.tolerances,
        )?;
        let level = measure(&sol.v, eps, sol.iterations);
        excess = level.gradient_excess;
        levels.push(level);
        current = Some(sol.v);
        if excess <= config.tolerances.gradient_slack {
            let v = current.expect("at least one level was solved");
            return Ok((v, PenaltyDiagnostics { levels }));
        }
    }
    Err(Error::ScheduleExhausted {
        excess,
        slack: config.tolerances.gradient_slack,
    })
}
