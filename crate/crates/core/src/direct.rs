//! Policy iteration for the discrete discounted problem
//! `max{δu − Δ_h u − f, |D_h u| − 1} = 0` with upwind `D_h`.
//!
//! Each iteration freezes a branch per interior node (elliptic or eikonal),
//! linearizes the eikonal branch along the current upwind direction, and
//! solves the resulting M-matrix system. Eikonal rows only ever reference
//! neighbors with strictly smaller values, so every chain of eikonal rows
//! ends at an elliptic row and the system is nonsingular.

use serde::{Deserialize, Serialize};

use crate::calculus::max_curvature;
use crate::cost::CostFunction;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scheme::{
    add_eikonal_row, add_elliptic_row, boundary_residual, laplacian_at, upwind_norm, StencilSystem,
};
use crate::tolerances::SolverTolerances;

/// Sup-norms of the branch residuals over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchResiduals {
    /// `sup |max{E, G}|`; zero exactly when complementarity holds.
    pub complementarity: f64,
    /// `sup max{E, 0}` with `E = δu − Δu − f`.
    pub elliptic_excess: f64,
    /// `sup max{G, 0}` with `G = |D_h u| − 1`.
    pub eikonal_excess: f64,
    /// `sup ||D_h u| − 1|` over boundary nodes.
    pub boundary: f64,
}

/// Constants that appear in the a-priori estimates, measured on a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `K = n + max_{|x|≤1} f`, the subsolution offset.
    pub k: f64,
    /// Largest `|x|` over inactive interior nodes (bounds the free boundary).
    pub c: f64,
    /// Largest second difference per unit length², the curvature bound.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountSolution {
    pub u: ScalarField,
    pub delta: f64,
    /// Interior nodes where the gradient constraint is the active branch.
    pub active: Vec<bool>,
    /// `δ·u(x_δ)` at the nodal argmin.
    pub lambda: f64,
    pub argmin: usize,
    pub residuals: BranchResiduals,
    pub constants: BoundConstants,
    pub iterations: usize,
    pub converged: bool,
}

impl DiscountSolution {
    /// Builds the solution record for a field, measuring residuals and
    /// constants. `active` marks interior nodes on the eikonal branch.
    pub fn from_field(
        f: &CostFunction,
        delta: f64,
        u: ScalarField,
        active: Vec<bool>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let grid = *u.grid();
        let fvals = grid.sample(|x| f.value(x));
        let residuals = branch_residuals(u.values(), fvals.values(), delta, &grid);
        let argmin = u.argmin();
        let c = (0..grid.len())
            .filter(|&k| !grid.is_boundary(k) && !active[k])
            .map(|k| grid.radius(k))
            .fold(0.0, f64::max);
        let constants = BoundConstants {
            k: grid.dim() as f64 + f.max_on_unit_sphere(),
            c,
            l: max_curvature(&u),
        };
        Self {
            lambda: delta * u.get(argmin),
            argmin,
            u,
            delta,
            active,
            residuals,
            constants,
            iterations,
            converged,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// Discrete complementarity: both branch excesses and the max of the
    /// two branches vanish to `tol`.
    pub fn satisfies_complementarity(&self, tol: f64) -> bool {
        let r = &self.residuals;
        r.complementarity <= tol && r.elliptic_excess <= tol && r.eikonal_excess <= tol
    }

    /// `min_x (u − (|x| − K)⁺)`; nonnegative when the subsolution lies below.
    pub fn subsolution_gap(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .map(|k| self.u.get(k) - (grid.radius(k) - self.constants.k).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_x (ū − u)` for the supersolution `ū = K/δ + {|x|²/2, |x| − 1/2}`.
    pub fn supersolution_gap(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .map(|k| {
                self.constants.k / self.delta + supersolution_shape(grid.radius(k)) - self.u.get(k)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn branch_residuals(u: &[f64], f: &[f64], delta: f64, grid: &Grid) -> BranchResiduals {
    // Differences are taken on u − min u; u itself can be O(1/δ).
    let c = u.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = u.iter().map(|v| v - c).collect();
    let u = &w[..];
    let mut r = BranchResiduals {
        complementarity: 0.0,
        elliptic_excess: 0.0,
        eikonal_excess: 0.0,
        boundary: 0.0,
    };
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            r.boundary = r.boundary.max(boundary_residual(u, grid, k).abs());
            continue;
        }
        let e = delta * u[k] - laplacian_at(u, grid, k) - (f[k] - delta * c);
        let g = upwind_norm(u, grid, k) - 1.0;
        r.complementarity = r.complementarity.max(e.max(g).abs());
        r.elliptic_excess = r.elliptic_excess.max(e);
        r.eikonal_excess = r.eikonal_excess.max(g);
    }
    r
}

/// `|D_h u| − 1` with the monotone upwind gradient, at every node.
pub fn eikonal_residual(field: &ScalarField) -> ScalarField {
    let grid = *field.grid();
    let u = field.values();
    grid.sample_indexed(|k| upwind_norm(u, &grid, k) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Boundary,
    Elliptic,
    Eikonal,
}

/// `|x|²/2` inside the unit ball, `|x| − 1/2` outside.
pub(crate) fn supersolution_shape(r: f64) -> f64 {
    if r <= 1.0 {
        0.5 * r * r
    } else {
        r - 0.5
    }
}

/// Solves the discounted problem by policy iteration.
///
/// The iteration works on `w = u − c` for a constant `c` near `min u` so the
/// unknowns stay O(R) even when `u ~ λ/δ` is large.
pub fn solve_constrained(
    f: &CostFunction,
    delta: f64,
    grid: &Grid,
    tol: &SolverTolerances,
    warm_start: Option<&ScalarField>,
) -> Result<DiscountSolution> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(invalid("delta", "must be positive"));
    }
    tol.validate()?;
    if f.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cost has dimension {} but grid has dimension {}",
            f.dim(),
            grid.dim()
        )));
    }
    let n = grid.len();
    let k_sub = grid.dim() as f64 + f.max_on_unit_sphere();
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
        None => (
            k_sub / delta,
            (0..n)
                .map(|k| supersolution_shape(grid.radius(k)))
                .collect(),
        ),
    };
    // f − δc: the right-hand side seen by the shifted unknown.
    let rhs_f: Vec<f64> = (0..n)
        .map(|k| {
            let p = grid.point(k);
            f.value(&p[..grid.dim()]) - delta * shift
        })
        .collect();

    let tie = 0.1 * tol.newton_tol;
    let mut system = StencilSystem::new(*grid);
    let mut branches = vec![Branch::Elliptic; n];
    let mut prev_branches: Option<Vec<Branch>> = None;
    let mut best: Option<(f64, Vec<f64>, Vec<Branch>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // Residual of the current iterate and the improved policy.
        let mut residual = 0.0f64;
        for k in 0..n {
            if grid.is_boundary(k) {
                branches[k] = Branch::Boundary;
                residual = residual.max(boundary_residual(&w, grid, k).abs());
                continue;
            }
            let e = delta * w[k] - laplacian_at(&w, grid, k) - rhs_f[k];
            let a = upwind_norm(&w, grid, k);
            let g = a - 1.0;
            residual = residual.max(e.max(g).abs());
            branches[k] = if a > 0.0 && g > e + tie {
                Branch::Eikonal
            } else {
                Branch::Elliptic
            };
        }
        if !residual.is_finite() {
            return Err(Error::NonFinite("policy iteration residual"));
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, w.clone(), branches.clone()));
        }
        let stable = prev_branches.as_ref().is_some_and(|p| *p == branches);
        if residual <= tol.newton_tol && (stable || iterations == 0 || residual == 0.0) {
            converged = true;
            break;
        }
        if iterations >= tol.max_iters {
            break;
        }

        system.clear();
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            match branches[k] {
                Branch::Boundary | Branch::Eikonal => {
                    add_eikonal_row(&mut system, &w, grid, k);
                    rhs[k] = 1.0;
                }
                Branch::Elliptic => {
                    add_elliptic_row(&mut system, grid, k, delta);
                    rhs[k] = rhs_f[k];
                }
            }
        }
        w = system.solve(&rhs)?;
        prev_branches = Some(branches.clone());
        iterations += 1;
    }

    if !converged {
        // Cycling guard: keep the iterate with the smallest residual.
        let (_, bw, bb) = best.expect("at least one iterate was evaluated");
        w = bw;
        branches = bb;
    }
    let active: Vec<bool> = branches.iter().map(|b| *b == Branch::Eikonal).collect();
    let u = ScalarField::new(*grid, w.iter().map(|v| v + shift).collect())?;
    Ok(DiscountSolution::from_field(
        f, delta, u, active, iterations, converged,
    ))
}

/// `sup_{x active} |u(x) − min_{y} (u(y) + |x − y|)|` with `y` ranging over
/// the closure of the inactive set (inactive nodes and their neighbors).
pub fn lipschitz_extension_residual(sol: &DiscountSolution) -> f64 {
    let grid = sol.grid();
    let inactive: Vec<bool> = (0..grid.len())
        .map(|k| !grid.is_boundary(k) && !sol.active[k])
        .collect();
    let active: Vec<usize> = (0..grid.len())
        .filter(|&k| !grid.is_boundary(k) && sol.active[k])
        .collect();
    lipschitz_extension_over(&sol.u, &inactive, &active)
}

/// Lipschitz-extension residual of `u` from the closure of `inside` to the
/// nodes in `outside`.
pub fn lipschitz_extension_over(u: &ScalarField, inside: &[bool], outside: &[usize]) -> f64 {
    let grid = u.grid();
    let mut closure = inside.to_vec();
    for k in (0..grid.len()).filter(|&k| inside[k]) {
        for axis in 0..grid.dim() {
            for step in [-1, 1] {
                if let Some(j) = grid.neighbor(k, axis, step) {
                    closure[j] = true;
                }
            }
        }
    }
    let sources: Vec<(usize, [f64; 2])> = (0..grid.len())
        .filter(|&k| closure[k])
        .map(|k| (k, grid.point(k)))
        .collect();
    if sources.is_empty() {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for &x in outside {
        if closure[x] {
            continue;
        }
        let px = grid.point(x);
        let ext = sources
            .iter()
            .map(|&(y, py)| u.get(y) + ((px[0] - py[0]).powi(2) + (px[1] - py[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((u.get(x) - ext).abs());
    }
    worst
}
