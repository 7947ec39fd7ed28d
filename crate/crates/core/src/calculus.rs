//! Finite-difference calculus on [`ScalarField`]s.
//!
//! Interior nodes use centered second-order stencils; boundary nodes fall back
//! to second-order one-sided stencils so every node carries a value.

use crate::error::{invalid, Result};
use crate::grid::{Grid, ScalarField};

/// A vector per node, padded to two components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, k: usize) -> [f64; 2] {
        self.components[k]
    }

    pub fn norm(&self, k: usize) -> f64 {
        let [a, b] = self.components[k];
        (a * a + b * b).sqrt()
    }

    pub fn norms(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(
            self.grid,
            (0..self.components.len()).map(|k| self.norm(k)).collect(),
        )
    }
}

fn first_derivative(u: &[f64], grid: &Grid, k: usize, axis: usize) -> f64 {
    let h = grid.spacing();
    match (grid.neighbor(k, axis, -1), grid.neighbor(k, axis, 1)) {
        (Some(m), Some(p)) => (u[p] - u[m]) / (2.0 * h),
        (None, Some(p)) => {
            let p2 = grid
                .neighbor(p, axis, 1)
                .expect("grid has at least 5 nodes per axis");
            (-3.0 * u[k] + 4.0 * u[p] - u[p2]) / (2.0 * h)
        }
        (Some(m), None) => {
            let m2 = grid
                .neighbor(m, axis, -1)
                .expect("grid has at least 5 nodes per axis");
            (3.0 * u[k] - 4.0 * u[m] + u[m2]) / (2.0 * h)
        }
        (None, None) => unreachable!("grid axes have at least 5 nodes"),
    }
}

fn second_derivative(u: &[f64], grid: &Grid, k: usize, axis: usize) -> f64 {
    let h2 = grid.spacing().powi(2);
    let step = |from: usize, s: isize| {
        grid.neighbor(from, axis, s)
            .expect("grid has at least 5 nodes per axis")
    };
    match (grid.neighbor(k, axis, -1), grid.neighbor(k, axis, 1)) {
        (Some(m), Some(p)) => (u[p] - 2.0 * u[k] + u[m]) / h2,
        (None, Some(p1)) => {
            let p2 = step(p1, 1);
            let p3 = step(p2, 1);
            (2.0 * u[k] - 5.0 * u[p1] + 4.0 * u[p2] - u[p3]) / h2
        }
        (Some(m1), None) => {
            let m2 = step(m1, -1);
            let m3 = step(m2, -1);
            (2.0 * u[k] - 5.0 * u[m1] + 4.0 * u[m2] - u[m3]) / h2
        }
        (None, None) => unreachable!("grid axes have at least 5 nodes"),
    }
}

pub fn gradient_central(field: &ScalarField) -> VectorField {
    let grid = *field.grid();
    let u = field.values();
    let components = (0..grid.len())
        .map(|k| {
            let mut g = [0.0; 2];
            for (axis, gi) in g.iter_mut().enumerate().take(grid.dim()) {
                *gi = first_derivative(u, &grid, k, axis);
            }
            g
        })
        .collect();
    VectorField { grid, components }
}

pub fn laplacian_5pt(field: &ScalarField) -> ScalarField {
    let grid = *field.grid();
    let u = field.values();
    let values = (0..grid.len())
        .map(|k| {
            (0..grid.dim())
                .map(|a| second_derivative(u, &grid, k, a))
                .sum()
        })
        .collect();
    ScalarField::from_vec_unchecked(grid, values)
}

/// Checks that `z` (in node units) points along an axis or a diagonal.
pub fn validate_direction(grid: &Grid, z: [isize; 2]) -> Result<()> {
    if z == [0, 0] {
        return Err(invalid("direction", "must be nonzero"));
    }
    if grid.dim() == 1 && z[1] != 0 {
        return Err(invalid("direction", "1-D grids only have axis directions"));
    }
    if z[0] != 0 && z[1] != 0 && z[0].abs() != z[1].abs() {
        return Err(invalid("direction", "must be an axis or a diagonal"));
    }
    Ok(())
}

/// Axis and diagonal directions with step lengths 1 and 2 (node units),
/// one representative per ± pair.
pub fn convexity_directions(grid: &Grid) -> Vec<[isize; 2]> {
    let mut dirs = vec![[1, 0], [2, 0]];
    if grid.dim() == 2 {
        dirs.extend([[0, 1], [0, 2], [1, 1], [2, 2], [1, -1], [2, -2]]);
    }
    dirs
}

/// `u(x+z) − 2u(x) + u(x−z)` with `z` in node units.
///
/// Nodes too close to the boundary for the centered stencil use the nearest
/// collinear triple `x, x±z, x±2z`; nodes where neither fits get 0.
pub fn second_difference(field: &ScalarField, z: [isize; 2]) -> Result<ScalarField> {
    let grid = *field.grid();
    validate_direction(&grid, z)?;
    let u = field.values();
    let neg = [-z[0], -z[1]];
    let twice = |d: [isize; 2]| [2 * d[0], 2 * d[1]];
    let values = (0..grid.len())
        .map(|k| match (grid.offset(k, z), grid.offset(k, neg)) {
            (Some(p), Some(m)) => u[p] - 2.0 * u[k] + u[m],
            (Some(p), None) => match grid.offset(k, twice(z)) {
                Some(p2) => u[k] - 2.0 * u[p] + u[p2],
                None => 0.0,
            },
            (None, Some(m)) => match grid.offset(k, twice(neg)) {
                Some(m2) => u[k] - 2.0 * u[m] + u[m2],
                None => 0.0,
            },
            (None, None) => 0.0,
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(grid, values))
}

/// Largest centered second difference divided by `|z|²` over interior
/// nodes, across all axis and diagonal directions of length 1 and 2.
pub fn max_curvature(field: &ScalarField) -> f64 {
    let grid = *field.grid();
    let u = field.values();
    let h = grid.spacing();
    let mut worst = f64::NEG_INFINITY;
    for z in convexity_directions(&grid) {
        let len2 = ((z[0] * z[0] + z[1] * z[1]) as f64) * h * h;
        for k in 0..grid.len() {
            if let (Some(p), Some(m)) = (grid.offset(k, z), grid.offset(k, [-z[0], -z[1]])) {
                worst = worst.max((u[p] - 2.0 * u[k] + u[m]) / len2);
            }
        }
    }
    worst
}

/// Smallest centered second difference over all axis and diagonal
/// directions of length 1 and 2.
pub fn min_second_difference(field: &ScalarField) -> f64 {
    let grid = *field.grid();
    let u = field.values();
    let mut worst = f64::INFINITY;
    for z in convexity_directions(&grid) {
        for k in 0..grid.len() {
            if let (Some(p), Some(m)) = (grid.offset(k, z), grid.offset(k, [-z[0], -z[1]])) {
                worst = worst.min(u[p] - 2.0 * u[k] + u[m]);
            }
        }
    }
    worst
}

fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Discrete convolution with the normalized bump `exp(−1/(1 − |x/ρ|²))`.
///
/// Near the box boundary the kernel is truncated and renormalized.
pub fn mollify(field: &ScalarField, radius: f64) -> Result<ScalarField> {
    let grid = *field.grid();
    let h = grid.spacing();
    if !radius.is_finite() || radius < h * (1.0 - 1e-12) {
        return Err(invalid(
            "radius",
            format!("must be at least the spacing {h}"),
        ));
    }
    if radius > grid.half_width() {
        return Err(invalid(
            "radius",
            format!("exceeds the domain half-width {}", grid.half_width()),
        ));
    }
    let reach = (radius / h).floor() as isize;
    let reach_y = if grid.dim() == 2 { reach } else { 0 };
    let mut stencil = Vec::new();
    for b in -reach_y..=reach_y {
        for a in -reach..=reach {
            let s = ((a * a + b * b) as f64).sqrt() * h / radius;
            let w = bump(s);
            if w > 0.0 {
                stencil.push(([a, b], w));
            }
        }
    }
    let u = field.values();
    let values = (0..grid.len())
        .map(|k| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for &(o, w) in &stencil {
                if let Some(j) = grid.offset(k, o) {
                    acc += w * u[j];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1() -> Grid {
        Grid::new(1, 2.0, 41).unwrap()
    }

    fn grid2() -> Grid {
        Grid::new(2, 2.0, 21).unwrap()
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = grid1();
        let u = g.sample(|x| x[0]);
        let d = gradient_central(&u);
        for k in 0..g.len() {
            assert!((d.get(k)[0] - 1.0).abs() < 1e-12);
        }
        let g = grid2();
        let u = g.sample(|x| 3.0 * x[0] - 2.0 * x[1] + 1.0);
        let d = gradient_central(&u);
        for k in 0..g.len() {
            assert!((d.get(k)[0] - 3.0).abs() < 1e-12);
            assert!((d.get(k)[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = grid2();
        let u = g.sample(|x| x[0] * x[0] + x[1] * x[1]);
        let lap = laplacian_5pt(&u);
        for k in 0..g.len() {
            assert!((lap.get(k) - 4.0).abs() < 1e-9, "node {k}: {}", lap.get(k));
        }
        let g = grid1();
        let u = g.sample(|x| x[0] * x[0]);
        let lap = laplacian_5pt(&u);
        for k in 0..g.len() {
            assert!((lap.get(k) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn second_difference_of_convex_quadratic_is_nonnegative() {
        let g = grid2();
        let u = g.sample(|x| 2.0 * x[0] * x[0] + x[0] * x[1] + x[1] * x[1]);
        for z in convexity_directions(&g) {
            let d = second_difference(&u, z).unwrap();
            assert!(d.values().iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn direction_validation() {
        let g = grid2();
        assert!(validate_direction(&g, [1, 2]).is_err());
        assert!(validate_direction(&g, [0, 0]).is_err());
        assert!(validate_direction(&grid1(), [0, 1]).is_err());
        assert!(validate_direction(&g, [-2, 2]).is_ok());
    }

    #[test]
    fn mollify_constant_is_identity() {
        let g = grid2();
        let u = ScalarField::constant(g, 3.5);
        let m = mollify(&u, 3.0 * g.spacing()).unwrap();
        assert!(m.values().iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn mollify_preserves_linear_in_interior() {
        let g = grid1();
        let h = g.spacing();
        let u = g.sample(|x| 2.0 * x[0] - 1.0);
        let m = mollify(&u, 4.0 * h).unwrap();
        for k in 4..g.len() - 4 {
            assert!((m.get(k) - u.get(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn mollify_rejects_bad_radius() {
        let g = grid1();
        let u = ScalarField::constant(g, 0.0);
        assert!(mollify(&u, 0.5 * g.spacing()).is_err());
        assert!(mollify(&u, 2.5).is_err());
    }

    #[test]
    fn mollified_kink_has_finite_nonnegative_curvature() {
        // |x| on h = 0.1, ρ = 4h: weights w_a = exp(-1/(1-(a/4)²)) for |a| ≤ 3.
        let g = grid1();
        let h = g.spacing();
        let u = g.sample(|x| x[0].abs());
        let m = mollify(&u, 4.0 * h).unwrap();
        let c = g.index([20, 0]);
        let d = second_difference(&m, [1, 0]).unwrap().get(c);

        // Independent evaluation of the three convolution sums.
        let w: Vec<f64> = (-3i32..=3)
            .map(|a| (-1.0 / (1.0 - (a as f64 / 4.0).powi(2))).exp())
            .collect();
        let total: f64 = w.iter().sum();
        let conv = |shift: i32| -> f64 {
            (-3i32..=3)
                .zip(&w)
                .map(|(a, wa)| wa * ((a + shift) as f64 * h).abs())
                .sum::<f64>()
                / total
        };
        let expected = conv(1) - 2.0 * conv(0) + conv(-1);
        assert!((d - expected).abs() < 1e-14);
        assert!(d > 0.0 && d.is_finite());
        // The weight at a = 0 carries the whole kink: 2h·w₀/Σw.
        assert!((d - 2.0 * h * w[3] / total).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn mollify_is_monotone_and_linear(
            a in prop::collection::vec(-5.0f64..5.0, 41),
            b in prop::collection::vec(0.0f64..3.0, 41),
            s in -2.0f64..2.0,
        ) {
            let g = grid1();
            let h = g.spacing();
            let fa = ScalarField::new(g, a.clone()).unwrap();
            let fb = ScalarField::new(g, a.iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
            let ma = mollify(&fa, 3.0 * h).unwrap();
            let mb = mollify(&fb, 3.0 * h).unwrap();
            for k in 0..g.len() {
                prop_assert!(ma.get(k) <= mb.get(k) + 1e-12);
            }
            let combo = ScalarField::new(g, a.iter().zip(&b).map(|(x, y)| x + s * y).collect()).unwrap();
            let fbb = ScalarField::new(g, b.clone()).unwrap();
            let mc = mollify(&combo, 3.0 * h).unwrap();
            let mbb = mollify(&fbb, 3.0 * h).unwrap();
            for k in 0..g.len() {
                prop_assert!((mc.get(k) - (ma.get(k) + s * mbb.get(k))).abs() < 1e-10);
            }
        }
    }
}
