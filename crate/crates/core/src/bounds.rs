//! Two-sided bounds on the ergodic eigenvalue from explicit test functions.
//!
//! A function `φ` with `|Dφ| ≤ 1` gives the lower bound `inf (Δφ + f)`; a
//! function `ψ` growing at least like `|x|` gives the upper bound
//! `sup_{|Dψ| < 1} (Δψ + f)`. On the grid both quantities are evaluated
//! with the 5-point Laplacian at interior nodes.

use serde::{Deserialize, Serialize};

use crate::calculus::{gradient_central, mollify};
use crate::cost::CostFunction;
use crate::discount::EigenSolution;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scheme::laplacian_at;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Mollification radii tried for the lower witness.
    pub mollification_radii: Vec<f64>,
    /// Allowed excess in `|D_h φ| ≤ 1` for the lower witness.
    pub gradient_slack: f64,
    /// Upper-bound nodes satisfy `|D_h ψ| < 1 − edge_slack`.
    pub edge_slack: f64,
    /// Boundary radial slopes of `ψ` must be at least `1 − far_field_slack`.
    pub far_field_slack: f64,
}

impl BoundsConfig {
    /// Radii `4h` and `8h` with the default slacks.
    pub fn for_grid(grid: &Grid) -> Self {
        let h = grid.spacing();
        Self {
            mollification_radii: vec![4.0 * h, 8.0 * h],
            gradient_slack: 1e-2,
            edge_slack: 1e-6,
            far_field_slack: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mollification_radii.is_empty() {
            return Err(invalid("mollification_radii", "must not be empty"));
        }
        for (name, v) in [
            ("gradient_slack", self.gradient_slack),
            ("edge_slack", self.edge_slack),
            ("far_field_slack", self.far_field_slack),
        ] {
            if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                return Err(invalid(name, "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Which test function produced a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub source: String,
    /// Mollification radius, if the field was mollified.
    pub radius: Option<f64>,
    /// Factor the field was multiplied by.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub gap: f64,
    pub lower: Witness,
    pub upper: Witness,
}

impl Certificate {
    /// `λ_− − tol ≤ λ ≤ λ_+ + tol`.
    pub fn brackets(&self, lambda: f64, tol: f64) -> bool {
        self.lambda_minus - tol <= lambda && lambda <= self.lambda_plus + tol
    }
}

fn cost_on(f: &CostFunction, grid: &Grid) -> Result<Vec<f64>> {
    if f.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cost has dimension {} but grid has dimension {}",
            f.dim(),
            grid.dim()
        )));
    }
    Ok(grid.sample(|x| f.value(x)).into_values())
}

/// `min (Δ_h φ + f)` over interior nodes.
///
/// Fails if centered `|D_h φ|` exceeds `1 + gradient_slack` anywhere, or if
/// the minimum sits next to the box boundary, where it would reflect the
/// truncation rather than the problem.
pub fn lower_bound(phi: &ScalarField, f: &CostFunction, gradient_slack: f64) -> Result<f64> {
    let grid = phi.grid();
    let fv = cost_on(f, grid)?;
    let grad = gradient_central(phi);
    let limit = 1.0 + gradient_slack;
    let max_gradient = (0..grid.len()).map(|k| grad.norm(k)).fold(0.0, f64::max);
    if max_gradient > limit {
        return Err(Error::GradientConstraint {
            max_gradient,
            limit,
        });
    }
    let u = phi.values();
    let (k, value) = (0..grid.len())
        .filter(|&k| !grid.is_boundary(k))
        .map(|k| (k, laplacian_at(u, grid, k) + fv[k]))
        .fold((usize::MAX, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        });
    if grid.is_boundary_ring(k) {
        return Err(Error::BoundaryExtremum(k));
    }
    Ok(value)
}

/// Pairs `(b, b′)` of a boundary node and the nearest node toward the
/// center on the same ray, kept when `|b − b′| ≤ R/2` so both lie in the far
/// field.
pub fn far_field_pairs(grid: &Grid) -> Vec<(usize, usize)> {
    let m = grid.nodes_per_axis() as i64;
    let h = grid.spacing();
    let mut out = Vec::new();
    for b in (0..grid.len()).filter(|&k| grid.is_boundary(k)) {
        let idx = grid.multi_index(b);
        // Offsets from the center in half-steps, so even `m` works too.
        let d: Vec<i64> = (0..grid.dim())
            .map(|a| 2 * idx[a] as i64 - (m - 1))
            .collect();
        let g = d.iter().fold(0, |g, &x| gcd(g, x.abs()));
        if g < 3 {
            continue;
        }
        let mut step = [0isize; 2];
        for (a, &x) in d.iter().enumerate() {
            step[a] = -(x / g) as isize;
        }
        let len = ((step[0] * step[0] + step[1] * step[1]) as f64).sqrt() * h;
        if len > 0.5 * grid.half_width() {
            continue;
        }
        if let Some(inner) = grid.offset(b, step) {
            out.push((b, inner));
        }
    }
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest slope `(ψ(b) − ψ(b′))/(|b| − |b′|)` over [`far_field_pairs`].
pub fn far_field_slope(psi: &ScalarField) -> f64 {
    let grid = psi.grid();
    far_field_pairs(grid)
        .into_iter()
        .map(|(b, i)| (psi.get(b) - psi.get(i)) / (grid.radius(b) - grid.radius(i)))
        .fold(f64::INFINITY, f64::min)
}

/// Extends `field` by `pad` nodes on every side, continuing each axis
/// linearly with its last difference. Affine fields extend exactly and
/// slopes never grow.
pub fn pad_linear(field: &ScalarField, pad: usize) -> Result<ScalarField> {
    let grid = field.grid();
    let m = grid.nodes_per_axis();
    let h = grid.spacing();
    let big = Grid::new(grid.dim(), grid.half_width() + pad as f64 * h, m + 2 * pad)?;
    let u = field.values();
    let at = |i: usize, j: usize| u[grid.index([i, j])];
    // Linear continuation of `g` on 0..m to any integer index.
    let extend = |i: isize, g: &dyn Fn(usize) -> f64| {
        let last = m as isize - 1;
        if i < 0 {
            g(0) + (-i) as f64 * (g(0) - g(1))
        } else if i > last {
            g(m - 1) + (i - last) as f64 * (g(m - 1) - g(m - 2))
        } else {
            g(i as usize)
        }
    };
    let values = (0..big.len())
        .map(|k| {
            let [bi, bj] = big.multi_index(k);
            let i = bi as isize - pad as isize;
            if grid.dim() == 1 {
                return extend(i, &|a| at(a, 0));
            }
            let j = bj as isize - pad as isize;
            extend(j, &|b| extend(i, &|a| at(a, b)))
        })
        .collect();
    ScalarField::new(big, values)
}

/// Mollifies `field` at `radius` after padding it linearly, so the kernel
/// is never truncated at the box edge, and restricts back to the grid.
pub fn mollify_padded(field: &ScalarField, radius: f64) -> Result<ScalarField> {
    let grid = *field.grid();
    let pad = (radius / grid.spacing()).ceil() as usize;
    let big = mollify(&pad_linear(field, pad)?, radius)?;
    let values = (0..grid.len())
        .map(|k| {
            let [i, j] = grid.multi_index(k);
            let jj = if grid.dim() == 2 { j + pad } else { 0 };
            big.get(big.grid().index([i + pad, jj]))
        })
        .collect();
    ScalarField::new(grid, values)
}

/// `max (Δ_h ψ + f)` over interior nodes with centered `|D_h ψ| < 1 −
/// edge_slack`, or `+∞` when there are none.
pub fn upper_bound(
    psi: &ScalarField,
    f: &CostFunction,
    edge_slack: f64,
    far_field_slack: f64,
) -> Result<f64> {
    let grid = psi.grid();
    let fv = cost_on(f, grid)?;
    let slope = far_field_slope(psi);
    if slope < 1.0 - far_field_slack {
        return Err(Error::FarField {
            slope,
            limit: 1.0 - far_field_slack,
        });
    }
    let grad = gradient_central(psi);
    let u = psi.values();
    let sup = (0..grid.len())
        .filter(|&k| !grid.is_boundary(k) && grad.norm(k) < 1.0 - edge_slack)
        .map(|k| laplacian_at(u, grid, k) + fv[k])
        .reduce(f64::max);
    Ok(sup.unwrap_or(f64::INFINITY))
}

/// Builds `(λ_−, λ_+)` from a converged eigen-solution.
///
/// The lower witness is `u*` mollified at each configured radius (after
/// linear padding, see [`mollify_padded`]) and scaled by
/// `1/(1 + gradient_slack)`; the best of these bounds is kept. The upper
/// witness is `u*` itself.
pub fn certify(
    eigen: &EigenSolution,
    f: &CostFunction,
    config: &BoundsConfig,
) -> Result<Certificate> {
    config.validate()?;
    let scale = 1.0 / (1.0 + config.gradient_slack);
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &rho in &config.mollification_radii {
        let phi = mollify_padded(&eigen.u_star, rho)?.scale(scale);
        match lower_bound(&phi, f, config.gradient_slack) {
            Ok(v) if best.is_none_or(|(b, _)| v > b) => best = Some((v, rho)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let (lambda_minus, rho) = match (best, last_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one radius was tried"),
    };
    let lambda_plus = upper_bound(&eigen.u_star, f, config.edge_slack, config.far_field_slack)?;
    Ok(Certificate {
        lambda_minus,
        lambda_plus,
        gap: lambda_plus - lambda_minus,
        lower: Witness {
            source: "mollified u*".into(),
            radius: Some(rho),
            scale,
        },
        upper: Witness {
            source: "u*".into(),
            radius: None,
            scale: 1.0,
        },
    })
}
