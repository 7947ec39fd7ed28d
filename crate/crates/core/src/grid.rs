//! Uniform tensor grids on `[-R, R]ⁿ` and nodal data.
//!
//! Nodes are stored with axis 0 varying fastest: node `(i, j)` lives at
//! index `i + m·j`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(
                "dimension",
                format!("grid solvers support n ∈ {{1, 2}}, got {dim}"),
            ));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(invalid("half_width", "must be positive"));
        }
        if nodes_per_axis < 5 {
            return Err(invalid(
                "nodes",
                format!("need at least 5 nodes per axis, got {nodes_per_axis}"),
            ));
        }
        Ok(Self {
            dim,
            half_width,
            nodes_per_axis,
        })
    }

    /// Grid whose spacing is the closest achievable to `spacing`.
    pub fn with_spacing(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(invalid("spacing", "must be positive"));
        }
        let intervals = (2.0 * half_width / spacing).round().max(1.0) as usize;
        Self::new(dim, half_width, intervals + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes_per_axis - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the `i`-th node along an axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Per-axis indices of node `k`; the second entry is 0 in 1-D.
    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        let m = self.nodes_per_axis;
        if self.dim == 1 {
            [k, 0]
        } else {
            [k % m, k / m]
        }
    }

    pub fn index(&self, idx: [usize; 2]) -> usize {
        idx[0]
            + if self.dim == 2 {
                idx[1] * self.nodes_per_axis
            } else {
                0
            }
    }

    /// Node position padded to two components (`x[1] = 0` in 1-D).
    pub fn point(&self, k: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(k);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    pub fn radius(&self, k: usize) -> f64 {
        let p = self.point(k);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Neighbor of `k` shifted by `offset` nodes along each axis.
    pub fn offset(&self, k: usize, offset: [isize; 2]) -> Option<usize> {
        let idx = self.multi_index(k);
        let m = self.nodes_per_axis as isize;
        let mut out = [0usize; 2];
        for a in 0..self.dim {
            let v = idx[a] as isize + offset[a];
            if v < 0 || v >= m {
                return None;
            }
            out[a] = v as usize;
        }
        if self.dim == 1 && offset[1] != 0 {
            return None;
        }
        Some(self.index(out))
    }

    /// Neighbor along one axis, `step = ±1`.
    pub fn neighbor(&self, k: usize, axis: usize, step: isize) -> Option<usize> {
        let mut o = [0isize; 2];
        o[axis] = step;
        self.offset(k, o)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let idx = self.multi_index(k);
        let last = self.nodes_per_axis - 1;
        idx[..self.dim].iter().any(|&i| i == 0 || i == last)
    }

    /// Interior nodes one step away from the boundary.
    pub fn is_boundary_ring(&self, k: usize) -> bool {
        if self.is_boundary(k) {
            return false;
        }
        let idx = self.multi_index(k);
        let last = self.nodes_per_axis - 1;
        idx[..self.dim].iter().any(|&i| i == 1 || i == last - 1)
    }

    /// Unit outward normal components at a boundary node (corners use the
    /// normalized diagonal).
    pub fn outward_normal(&self, k: usize) -> [f64; 2] {
        let idx = self.multi_index(k);
        let last = self.nodes_per_axis - 1;
        let mut nu = [0.0f64; 2];
        for a in 0..self.dim {
            if idx[a] == 0 {
                nu[a] = -1.0;
            } else if idx[a] == last {
                nu[a] = 1.0;
            }
        }
        let len = (nu[0] * nu[0] + nu[1] * nu[1]).sqrt();
        if len > 0.0 {
            nu[0] /= len;
            nu[1] /= len;
        }
        nu
    }

    /// Sample a function of position at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let values = (0..self.len())
            .map(|k| {
                let p = self.point(k);
                f(&p[..self.dim])
            })
            .collect();
        ScalarField {
            grid: *self,
            values,
        }
    }

    /// Build a field from a function of the node index.
    pub fn sample_indexed(&self, f: impl Fn(usize) -> f64) -> ScalarField {
        ScalarField {
            grid: *self,
            values: (0..self.len()).map(f).collect(),
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.nodes_per_axis == other.nodes_per_axis
            && self.half_width == other.half_width
    }
}

/// Real nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scale(&self, t: f64) -> Self {
        self.map(|v| t * v)
    }

    /// Index of the smallest value; ties go to the lowest index.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn min(&self) -> f64 {
        self.values[self.argmin()]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::ShapeMismatch(
                "fields live on different grids".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
