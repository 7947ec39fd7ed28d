//! Convex superlinear running costs.
//!
//! Every built-in family is minimized at the origin, so the nonnegativity
//! normalization only needs `f(0)`. A family whose minimum is negative is
//! lifted by a constant; the lift is recorded in [`CostFunction::offset`] so
//! eigenvalues can be reported for the original cost.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostFamily {
    /// `|x|²`
    Quadratic,
    /// `c·|x|^p` with `c > 0`, `p > 1`.
    Power { coefficient: f64, exponent: f64 },
    /// `x·Ax` with `A` symmetric positive definite, stored row-major.
    Anisotropic { matrix: Vec<f64> },
    /// `f₀(|x|)` by linear interpolation of a convex nondecreasing table
    /// starting at `r = 0`; extended linearly past the last radius.
    RadialTable { radii: Vec<f64>, values: Vec<f64> },
    /// `base + shift`
    Shifted { base: Box<CostFamily>, shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    family: CostFamily,
    dim: usize,
    offset: f64,
}

impl CostFunction {
    /// Validates the family parameters and builds the evaluator.
    pub fn new(family: CostFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        validate(&family, dim)?;
        let min = raw_value(&family, &vec![0.0; dim]);
        let offset = if min < 0.0 { -min } else { 0.0 };
        Ok(Self {
            family,
            dim,
            offset,
        })
    }

    pub fn quadratic(dim: usize) -> Result<Self> {
        Self::new(CostFamily::Quadratic, dim)
    }

    pub fn power(coefficient: f64, exponent: f64, dim: usize) -> Result<Self> {
        Self::new(
            CostFamily::Power {
                coefficient,
                exponent,
            },
            dim,
        )
    }

    pub fn anisotropic(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(CostFamily::Anisotropic { matrix }, dim)
    }

    pub fn radial_table(radii: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(CostFamily::RadialTable { radii, values }, dim)
    }

    /// `f + c`, keeping the dimension.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(
            CostFamily::Shifted {
                base: Box::new(self.family.clone()),
                shift,
            },
            self.dim,
        )
    }

    pub fn family(&self) -> &CostFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Constant added at construction to make the cost nonnegative.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        raw_value(&self.family, x) + self.offset
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        raw_gradient(&self.family, x)
    }

    /// Row-major `n × n` Hessian. For `c|x|^p` with `p < 2` the Hessian is
    /// unbounded at the origin and reported as `+∞` on the diagonal.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        raw_hessian(&self.family, x)
    }

    pub fn is_radial(&self) -> bool {
        radial_raw(&self.family, 0.0).is_some()
    }

    /// `f₀(r)` for rotationally symmetric costs.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        radial_raw(&self.family, r).map(|v| v + self.offset)
    }

    /// The profile `r ↦ f₀(r)` if the cost is rotationally symmetric.
    pub fn radial(&self) -> Option<impl Fn(f64) -> f64 + '_> {
        self.is_radial()
            .then_some(move |r: f64| radial_raw(&self.family, r).unwrap_or(f64::NAN) + self.offset)
    }

    /// `max_{|x| = 1} f`, which equals the maximum over the closed unit ball
    /// for a convex cost.
    pub fn max_on_unit_sphere(&self) -> f64 {
        if let Some(v) = self.radial_value(1.0) {
            return v;
        }
        match self.dim {
            1 => self.value(&[1.0]).max(self.value(&[-1.0])),
            2 => (0..7200)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::PI / 3600.0;
                    self.value(&[t.cos(), t.sin()])
                })
                .fold(f64::NEG_INFINITY, f64::max),
            _ => {
                // Only the anisotropic family can be non-radial here.
                let base = anisotropic_top_eigenvalue(&self.family, self.dim);
                base + total_shift(&self.family) + self.offset
            }
        }
    }
}

fn validate(family: &CostFamily, dim: usize) -> Result<()> {
    match family {
        CostFamily::Quadratic => Ok(()),
        CostFamily::Power {
            coefficient,
            exponent,
        } => {
            if !exponent.is_finite() || *exponent <= 1.0 {
                return Err(Error::NotSuperlinear(*exponent));
            }
            if !coefficient.is_finite() || *coefficient <= 0.0 {
                return Err(invalid("coefficient", "must be positive"));
            }
            Ok(())
        }
        CostFamily::Anisotropic { matrix } => {
            if matrix.len() != dim * dim {
                return Err(Error::ShapeMismatch(format!(
                    "matrix has {} entries, expected {}",
                    matrix.len(),
                    dim * dim
                )));
            }
            if matrix.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite("anisotropic matrix"));
            }
            let scale = matrix.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0);
            for i in 0..dim {
                for j in 0..i {
                    if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 * scale {
                        return Err(Error::NotConvex("matrix is not symmetric".into()));
                    }
                }
            }
            if !cholesky_succeeds(matrix, dim) {
                return Err(Error::NotConvex("matrix is not positive definite".into()));
            }
            Ok(())
        }
        CostFamily::RadialTable { radii, values } => {
            if radii.len() != values.len() || radii.len() < 2 {
                return Err(Error::ShapeMismatch(
                    "radial table needs at least two (radius, value) pairs of equal length".into(),
                ));
            }
            if radii.iter().chain(values).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("radial table"));
            }
            if radii[0] != 0.0 {
                return Err(invalid("radii", "table must start at r = 0"));
            }
            if radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("radii", "must be strictly increasing"));
            }
            let slopes: Vec<f64> = radii
                .windows(2)
                .zip(values.windows(2))
                .map(|(r, v)| (v[1] - v[0]) / (r[1] - r[0]))
                .collect();
            let scale = slopes.iter().fold(1.0f64, |m, s| m.max(s.abs()));
            if slopes[0] < -1e-12 * scale {
                return Err(invalid("values", "radial profile must be nondecreasing"));
            }
            if slopes.windows(2).any(|s| s[1] < s[0] - 1e-12 * scale) {
                return Err(Error::NotConvex("radial table slopes decrease".into()));
            }
            Ok(())
        }
        CostFamily::Shifted { base, shift } => {
            if !shift.is_finite() {
                return Err(Error::NonFinite("shift"));
            }
            validate(base, dim)
        }
    }
}

fn cholesky_succeeds(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn table_eval(radii: &[f64], values: &[f64], r: f64) -> (f64, f64) {
    let last = radii.len() - 1;
    let seg = match radii.iter().position(|&ri| ri > r) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => last - 1,
    };
    let slope = (values[seg + 1] - values[seg]) / (radii[seg + 1] - radii[seg]);
    (values[seg] + slope * (r - radii[seg]), slope)
}

fn raw_value(family: &CostFamily, x: &[f64]) -> f64 {
    match family {
        CostFamily::Quadratic => x.iter().map(|v| v * v).sum(),
        CostFamily::Power {
            coefficient,
            exponent,
        } => coefficient * norm(x).powf(*exponent),
        CostFamily::Anisotropic { matrix } => {
            let n = x.len();
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i] * matrix[i * n + j] * x[j];
                }
            }
            s
        }
        CostFamily::RadialTable { radii, values } => table_eval(radii, values, norm(x)).0,
        CostFamily::Shifted { base, shift } => raw_value(base, x) + shift,
    }
}

fn raw_gradient(family: &CostFamily, x: &[f64]) -> Vec<f64> {
    match family {
        CostFamily::Quadratic => x.iter().map(|v| 2.0 * v).collect(),
        CostFamily::Power {
            coefficient,
            exponent,
        } => {
            let r = norm(x);
            if r == 0.0 {
                return vec![0.0; x.len()];
            }
            let s = coefficient * exponent * r.powf(exponent - 2.0);
            x.iter().map(|v| s * v).collect()
        }
        CostFamily::Anisotropic { matrix } => {
            let n = x.len();
            (0..n)
                .map(|i| 2.0 * (0..n).map(|j| matrix[i * n + j] * x[j]).sum::<f64>())
                .collect()
        }
        CostFamily::RadialTable { radii, values } => {
            let r = norm(x);
            if r == 0.0 {
                return vec![0.0; x.len()];
            }
            let slope = table_eval(radii, values, r).1;
            x.iter().map(|v| slope * v / r).collect()
        }
        CostFamily::Shifted { base, .. } => raw_gradient(base, x),
    }
}

fn raw_hessian(family: &CostFamily, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let identity = |s: f64| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = s;
        }
        h
    };
    match family {
        CostFamily::Quadratic => identity(2.0),
        CostFamily::Power {
            coefficient,
            exponent,
        } => {
            let r = norm(x);
            if r == 0.0 {
                return if *exponent > 2.0 {
                    identity(0.0)
                } else if *exponent == 2.0 {
                    identity(2.0 * coefficient)
                } else {
                    identity(f64::INFINITY)
                };
            }
            let s = coefficient * exponent * r.powf(exponent - 2.0);
            let mut h = identity(s);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += s * (exponent - 2.0) * x[i] * x[j] / (r * r);
                }
            }
            h
        }
        CostFamily::Anisotropic { matrix } => matrix.iter().map(|a| 2.0 * a).collect(),
        CostFamily::RadialTable { radii, values } => {
            let r = norm(x);
            if r == 0.0 {
                return identity(0.0);
            }
            let slope = table_eval(radii, values, r).1;
            let mut h = identity(slope / r);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] -= slope / r * x[i] * x[j] / (r * r);
                }
            }
            h
        }
        CostFamily::Shifted { base, .. } => raw_hessian(base, x),
    }
}

fn radial_raw(family: &CostFamily, r: f64) -> Option<f64> {
    match family {
        CostFamily::Quadratic => Some(r * r),
        CostFamily::Power {
            coefficient,
            exponent,
        } => Some(coefficient * r.powf(*exponent)),
        CostFamily::Anisotropic { matrix } => {
            let n = (matrix.len() as f64).sqrt().round() as usize;
            let a = matrix[0];
            let isotropic = (0..n).all(|i| {
                (0..n).all(|j| {
                    let expect = if i == j { a } else { 0.0 };
                    matrix[i * n + j] == expect
                })
            });
            isotropic.then_some(a * r * r)
        }
        CostFamily::RadialTable { radii, values } => Some(table_eval(radii, values, r).0),
        CostFamily::Shifted { base, shift } => radial_raw(base, r).map(|v| v + shift),
    }
}

fn total_shift(family: &CostFamily) -> f64 {
    match family {
        CostFamily::Shifted { base, shift } => shift + total_shift(base),
        _ => 0.0,
    }
}

fn anisotropic_top_eigenvalue(family: &CostFamily, n: usize) -> f64 {
    match family {
        CostFamily::Anisotropic { matrix } => {
            let mut v = vec![1.0 / (n as f64).sqrt(); n];
            let mut lambda = 0.0;
            for _ in 0..500 {
                let w: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| matrix[i * n + j] * v[j]).sum())
                    .collect();
                lambda = norm(&w);
                if lambda == 0.0 {
                    break;
                }
                v = w.iter().map(|x| x / lambda).collect();
            }
            lambda
        }
        CostFamily::Shifted { base, .. } => anisotropic_top_eigenvalue(base, n),
        _ => f64::NAN,
    }
}
