//! Discrete operators shared by the penalty and policy-iteration solvers.
//!
//! Both solvers discretize the same equation on the same stencil: the
//! 5-point Laplacian, the monotone upwind gradient
//! `a_k = max(D⁻u, −D⁺u, 0)` per axis, and the boundary row `|D_h u| = 1`
//! where the upwind gradient only sees in-grid neighbors. In 1-D that row is
//! the outward slope condition `Dv·ν = 1`; in 2-D it also lets the edges
//! follow the `|x|`-like growth instead of forcing a unit normal slope.
//! Keeping them here is what makes the two
//! backends converge to the same discrete solution.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Upwind difference along one axis: its value `a ≥ 0` and the neighbor it
/// was taken against (`None` when `a = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Upwind {
    pub value: f64,
    pub neighbor: Option<usize>,
}

pub(crate) fn upwind(u: &[f64], grid: &Grid, k: usize) -> [Upwind; 2] {
    let h = grid.spacing();
    let mut out = [Upwind {
        value: 0.0,
        neighbor: None,
    }; 2];
    for (axis, slot) in out.iter_mut().enumerate().take(grid.dim()) {
        let mut best = 0.0;
        let mut nb = None;
        for step in [-1, 1] {
            if let Some(j) = grid.neighbor(k, axis, step) {
                let d = (u[k] - u[j]) / h;
                if d > best {
                    best = d;
                    nb = Some(j);
                }
            }
        }
        *slot = Upwind {
            value: best,
            neighbor: nb,
        };
    }
    out
}

pub(crate) fn upwind_norm(u: &[f64], grid: &Grid, k: usize) -> f64 {
    let [a, b] = upwind(u, grid, k);
    (a.value * a.value + b.value * b.value).sqrt()
}

pub(crate) fn laplacian_at(u: &[f64], grid: &Grid, k: usize) -> f64 {
    let h2 = grid.spacing().powi(2);
    let mut s = 0.0;
    for axis in 0..grid.dim() {
        let m = grid.neighbor(k, axis, -1).expect("interior node");
        let p = grid.neighbor(k, axis, 1).expect("interior node");
        s += (u[p] - 2.0 * u[k] + u[m]) / h2;
    }
    s
}

/// The inner neighbors of the outward-slope row `Dv·ν = 1` at `k`, with
/// weight `1/(√c·h)` where `c` is the number of boundary axes. Used for
/// boundary rows whose upwind gradient vanishes.
pub(crate) fn boundary_stencil(grid: &Grid, k: usize) -> ([Option<usize>; 2], f64) {
    let nu = grid.outward_normal(k);
    let mut inner = [None; 2];
    let mut count = 0.0f64;
    for axis in 0..grid.dim() {
        if nu[axis] != 0.0 {
            let step = if nu[axis] > 0.0 { -1 } else { 1 };
            inner[axis] = grid.neighbor(k, axis, step);
            count += 1.0;
        }
    }
    (inner, 1.0 / (count.sqrt() * grid.spacing()))
}

/// `|D_h u| − 1` at a boundary node, one-sided where neighbors are missing.
pub(crate) fn boundary_residual(u: &[f64], grid: &Grid, k: usize) -> f64 {
    upwind_norm(u, grid, k) - 1.0
}

/// Adds the linearization of `|D_h u| = 1` at `k` along the current upwind
/// direction, with right-hand side 1 for the unknown. Nodes whose upwind
/// gradient vanishes get the outward-slope row instead.
pub(crate) fn add_eikonal_row(system: &mut StencilSystem, u: &[f64], grid: &Grid, k: usize) {
    let h = grid.spacing();
    let up = upwind(u, grid, k);
    let norm = (up[0].value.powi(2) + up[1].value.powi(2)).sqrt();
    if norm > 0.0 {
        for a in up {
            if let Some(j) = a.neighbor {
                let e = a.value / norm;
                system.add(k, k, e / h);
                system.add(k, j, -e / h);
            }
        }
    } else {
        let (inner, w) = boundary_stencil(grid, k);
        for &j in inner.iter().flatten() {
            system.add(k, k, w);
            system.add(k, j, -w);
        }
    }
}

/// Adds the 5-point `c·u − Δ_h u` row at interior node `k`.
pub(crate) fn add_elliptic_row(system: &mut StencilSystem, grid: &Grid, k: usize, c: f64) {
    let h2 = grid.spacing().powi(2);
    system.add(k, k, c + 2.0 * grid.dim() as f64 / h2);
    for axis in 0..grid.dim() {
        for step in [-1, 1] {
            let j = grid.neighbor(k, axis, step).expect("interior node");
            system.add(k, j, -1.0 / h2);
        }
    }
}

/// Assembles matrices on the fixed 5-point pattern and solves them.
///
/// Every row stores its diagonal and all in-grid neighbors (explicit zeros
/// included), so the sparsity pattern never changes and the symbolic
/// factorization is computed once per grid.
pub(crate) struct StencilSystem {
    grid: Grid,
    /// Per node: diagonal, then neighbors in the order of `NEIGHBORS`.
    coeffs: Vec<[f64; 5]>,
    symbolic: Option<SymbolicLu<usize>>,
}

const NEIGHBORS: [(usize, isize); 4] = [(0, -1), (0, 1), (1, -1), (1, 1)];

impl StencilSystem {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![[0.0; 5]; grid.len()],
            symbolic: None,
        }
    }

    pub fn clear(&mut self) {
        self.coeffs.iter_mut().for_each(|c| *c = [0.0; 5]);
    }

    /// Adds `value` at (row `k`, column `j`); `j` must be `k` or a neighbor.
    pub fn add(&mut self, k: usize, j: usize, value: f64) {
        if j == k {
            self.coeffs[k][0] += value;
            return;
        }
        for (slot, &(axis, step)) in NEIGHBORS.iter().enumerate() {
            if axis < self.grid.dim() && self.grid.neighbor(k, axis, step) == Some(j) {
                self.coeffs[k][slot + 1] += value;
                return;
            }
        }
        panic!("column {j} is not on the stencil of row {k}");
    }

    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let mut triplets = Vec::with_capacity(n * (1 + 2 * self.grid.dim()));
        for k in 0..n {
            triplets.push(Triplet::new(k, k, self.coeffs[k][0]));
            for (slot, &(axis, step)) in NEIGHBORS.iter().enumerate() {
                if axis >= self.grid.dim() {
                    continue;
                }
                if let Some(j) = self.grid.neighbor(k, axis, step) {
                    triplets.push(Triplet::new(k, j, self.coeffs[k][slot + 1]));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|_| Error::Singular)?;
        if self.symbolic.is_none() {
            self.symbolic = Some(SymbolicLu::try_new(mat.symbolic()).map_err(|_| Error::Singular)?);
        }
        let symbolic = self
            .symbolic
            .clone()
            .expect("symbolic factorization cached above");
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref()).map_err(|_| Error::Singular)?;
        let b = Col::<f64>::from_fn(n, |i| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upwind_picks_descent_neighbor() {
        let g = Grid::new(1, 2.0, 5).unwrap();
        let u = [4.0, 1.0, 0.0, 1.0, 4.0];
        let [a, _] = upwind(&u, &g, 3);
        assert_eq!(a.value, 1.0);
        assert_eq!(a.neighbor, Some(2));
        let [a, _] = upwind(&u, &g, 2);
        assert_eq!(a.value, 0.0);
        assert_eq!(a.neighbor, None);
    }

    #[test]
    fn boundary_rows_use_one_sided_upwind_gradient() {
        let g = Grid::new(1, 1.0, 5).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| g.radius(k)).collect();
        assert!(boundary_residual(&u, &g, 0).abs() < 1e-12);
        assert!(boundary_residual(&u, &g, 4).abs() < 1e-12);

        let g = Grid::new(2, 1.0, 5).unwrap();
        let u: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.point(k);
                p[0].abs() + p[1].abs()
            })
            .collect();
        for k in 0..g.len() {
            if g.is_boundary(k) {
                let [i, j] = g.multi_index(k);
                // Both axes descend toward the center except on the axes.
                let axes = [i != 2, j != 2].iter().filter(|&&b| b).count() as f64;
                assert!((boundary_residual(&u, &g, k) - (axes.sqrt() - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stencil_system_solves_poisson_problem() {
        let g = Grid::new(2, 1.0, 9).unwrap();
        let mut sys = StencilSystem::new(g);
        let h2 = g.spacing().powi(2);
        let exact: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.point(k);
                p[0] * p[0] + 0.5 * p[1] * p[1]
            })
            .collect();
        let mut rhs = vec![0.0; g.len()];
        for k in 0..g.len() {
            if g.is_boundary(k) {
                sys.add(k, k, 1.0);
                rhs[k] = exact[k];
            } else {
                sys.add(k, k, 1.0 + 4.0 / h2);
                for (axis, step) in NEIGHBORS {
                    sys.add(k, g.neighbor(k, axis, step).unwrap(), -1.0 / h2);
                }
                rhs[k] = exact[k] - 3.0;
            }
        }
        for _ in 0..2 {
            let x = sys.solve(&rhs).unwrap();
            for k in 0..g.len() {
                assert!((x[k] - exact[k]).abs() < 1e-10);
            }
        }
    }
}
