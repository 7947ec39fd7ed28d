//! Radial reduction for rotationally symmetric costs `f(x) = f₀(|x|)`.
//!
//! With `u = φ(|x|)` the ergodic problem becomes a free-boundary ODE: on
//! `[0, r₀]` the elliptic equation `φ″ + (n−1)φ′/r = λ − f₀` holds, and
//! `φ′ ≡ 1` beyond. Integrating gives
//!
//! ```text
//! φ′(r) = r^{1−n} ∫₀^r s^{n−1} (λ − f₀(s)) ds,
//! ```
//!
//! and the two conditions `φ′(r₀) = 1`, `φ″(r₀) = 0` fix `(λ, r₀)`: the
//! second reads `λ = f₀(r₀) + (n−1)/r₀`, which leaves one equation in `r₀`.
//!
//! ```
//! use ergodic_hjb::radial::radial_eigen;
//! let e = radial_eigen(|r| r * r, 2).unwrap();
//! assert!((e.r0 - 2f64.cbrt()).abs() < 1e-10);
//! ```

use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const QUAD_TOL: f64 = 1e-12;
const BRACKET_START: f64 = 1e-3;
const BRACKET_LIMIT: f64 = 1e6;

/// `∫_a^b g` by adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (g(a), g(b));
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(g, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("dimension", "must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialEigen {
    pub lambda: f64,
    pub r0: f64,
}

/// `λ` forced by smooth pasting at `r`.
fn pasting_lambda(f0: &dyn Fn(f64) -> f64, n: usize, r: f64) -> f64 {
    f0(r) + (n as f64 - 1.0) / r
}

/// `r^{1−n} ∫₀^r s^{n−1}(λ − f₀(s)) ds`.
fn slope(f0: &dyn Fn(f64) -> f64, n: usize, lambda: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let p = n as i32 - 1;
    let integrand = |s: f64| s.powi(p) * (lambda - f0(s));
    let scale = r.powi(p).max(1.0) * (1.0 + lambda.abs());
    adaptive_simpson(&integrand, 0.0, r, QUAD_TOL * scale) / r.powi(p)
}

/// Solves for the ergodic eigenvalue and free-boundary radius.
pub fn radial_eigen(f0: impl Fn(f64) -> f64, n: usize) -> Result<RadialEigen> {
    check_dim(n)?;
    let f0: &dyn Fn(f64) -> f64 = &f0;
    let residual = |r: f64| slope(f0, n, pasting_lambda(f0, n, r), r) - 1.0;
    let mut lo = BRACKET_START;
    if residual(lo) >= 0.0 {
        return Err(Error::NoBracket(lo));
    }
    let mut hi = 2.0 * lo;
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::NoBracket(BRACKET_LIMIT));
        }
    }
    let mut conv = SimpleConvergency {
        eps: 1e-15,
        max_iter: 200,
    };
    let r0 = find_root_brent(lo, hi, residual, &mut conv).map_err(|_| Error::NoBracket(hi))?;
    Ok(RadialEigen {
        lambda: pasting_lambda(f0, n, r0),
        r0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub n: usize,
    /// The eigenvalue, or `δ·φ(0)` for a discounted profile.
    pub lambda: f64,
    pub r0: f64,
    /// `Some(δ)` for discounted profiles.
    pub delta: Option<f64>,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    /// `|φ″(r₀−)|`.
    pub pasting_defect: f64,
}

impl RadialSolution {
    /// `φ` at radius `r` by linear interpolation between samples, extended
    /// with slope 1 past the last sample.
    pub fn value_at(&self, r: f64) -> f64 {
        let i = self.r.partition_point(|&s| s <= r);
        if i == 0 {
            return self.phi[0];
        }
        if i == self.r.len() {
            let last = self.r.len() - 1;
            return self.phi[last] + (r - self.r[last]);
        }
        let (r1, r2) = (self.r[i - 1], self.r[i]);
        let t = (r - r1) / (r2 - r1);
        (1.0 - t) * self.phi[i - 1] + t * self.phi[i]
    }
}

fn check_samples(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() {
        return Err(invalid("r_grid", "must not be empty"));
    }
    if r_grid.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(invalid("r_grid", "radii must be finite and nonnegative"));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("r_grid", "radii must be strictly increasing"));
    }
    Ok(())
}

/// Samples the ergodic profile with `φ(0) = 0` at the given radii.
pub fn radial_profile(
    f0: impl Fn(f64) -> f64,
    n: usize,
    lambda: f64,
    r0: f64,
    r_grid: &[f64],
) -> Result<RadialSolution> {
    check_dim(n)?;
    check_samples(r_grid)?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(invalid("r0", "must be positive"));
    }
    let f0: &dyn Fn(f64) -> f64 = &f0;
    let dphi = |r: f64| {
        if r >= r0 {
            1.0
        } else {
            slope(f0, n, lambda, r)
        }
    };
    let d2phi = |r: f64| {
        if r > r0 {
            0.0
        } else if r == 0.0 {
            (lambda - f0(0.0)) / n as f64
        } else {
            lambda - f0(r) - (n as f64 - 1.0) / r * slope(f0, n, lambda, r)
        }
    };
    let inner = |s: f64| slope(f0, n, lambda, s);
    let phi_r0 = adaptive_simpson(&inner, 0.0, r0, QUAD_TOL);

    let mut phi = Vec::with_capacity(r_grid.len());
    let mut prev = (0.0, 0.0);
    for &r in r_grid {
        let value = if r > r0 {
            phi_r0 + (r - r0)
        } else {
            let v = prev.1 + adaptive_simpson(&inner, prev.0, r, QUAD_TOL);
            prev = (r, v);
            v
        };
        phi.push(value);
    }

    // Five-point backward difference of φ′, exact for quartic φ′.
    let eta = 1e-3 * r0;
    let d: Vec<f64> = (0..5)
        .map(|j| slope(f0, n, lambda, r0 - j as f64 * eta))
        .collect();
    let second =
        (25.0 * d[0] - 48.0 * d[1] + 36.0 * d[2] - 16.0 * d[3] + 3.0 * d[4]) / (12.0 * eta);

    Ok(RadialSolution {
        n,
        lambda,
        r0,
        delta: None,
        r: r_grid.to_vec(),
        phi,
        dphi: r_grid.iter().map(|&r| dphi(r)).collect(),
        d2phi: r_grid.iter().map(|&r| d2phi(r)).collect(),
        pasting_defect: second.abs(),
    })
}

/// State `(r, φ, φ′)` of the discounted radial ODE.
#[derive(Debug, Clone, Copy)]
struct State {
    r: f64,
    phi: f64,
    dphi: f64,
}

struct Ode<'a> {
    f0: &'a dyn Fn(f64) -> f64,
    n: f64,
    delta: f64,
}

impl Ode<'_> {
    fn accel(&self, r: f64, phi: f64, dphi: f64) -> f64 {
        if r == 0.0 {
            (self.delta * phi - (self.f0)(0.0)) / self.n
        } else {
            self.delta * phi - (self.f0)(r) - (self.n - 1.0) / r * dphi
        }
    }

    fn rk4(&self, s: State, h: f64) -> State {
        let (r, y, p) = (s.r, s.phi, s.dphi);
        let k1 = (p, self.accel(r, y, p));
        let k2 = (
            p + 0.5 * h * k1.1,
            self.accel(r + 0.5 * h, y + 0.5 * h * k1.0, p + 0.5 * h * k1.1),
        );
        let k3 = (
            p + 0.5 * h * k2.1,
            self.accel(r + 0.5 * h, y + 0.5 * h * k2.0, p + 0.5 * h * k2.1),
        );
        let k4 = (p + h * k3.1, self.accel(r + h, y + h * k3.0, p + h * k3.1));
        State {
            r: r + h,
            phi: y + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            dphi: p + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        }
    }

    fn advance(&self, mut s: State, to: f64, step: f64) -> State {
        let steps = ((to - s.r) / step).ceil().max(1.0) as usize;
        let h = (to - s.r) / steps as f64;
        for _ in 0..steps {
            s = self.rk4(s, h);
        }
        s
    }

    /// Integrates from `φ(0) = a` until `φ′` first reaches 1. Returns the
    /// state there, or `Err(max φ′)` when it never does before `r_max` or
    /// turns steeply downhill.
    fn shoot(&self, a: f64, step: f64, r_max: f64) -> std::result::Result<State, f64> {
        let mut s = State {
            r: 0.0,
            phi: a,
            dphi: 0.0,
        };
        let mut best = 0.0f64;
        while s.r < r_max {
            let next = self.rk4(s, step);
            if next.dphi >= 1.0 {
                let (mut lo, mut hi) = (0.0, step);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.rk4(s, mid).dphi >= 1.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(self.rk4(s, hi));
            }
            best = best.max(next.dphi);
            if next.dphi < -1.0 {
                break;
            }
            s = next;
        }
        Err(best)
    }
}

/// Discounted radial profile by shooting on `a = φ(0)`.
///
/// For each `a` the ODE runs from the origin until `φ′ = 1`; the miss is
/// `φ″` there, or `max φ′ − 1` when `φ′` never reaches 1. The miss is
/// increasing and continuous in `a`, so bisection finds the profile with
/// `φ′(r₀) = 1` and `φ″(r₀) = 0`.
pub fn radial_discounted(
    f0: impl Fn(f64) -> f64,
    n: usize,
    delta: f64,
    r_grid: &[f64],
) -> Result<RadialSolution> {
    check_dim(n)?;
    check_samples(r_grid)?;
    if !delta.is_finite() || delta <= 0.0 {
        return Err(invalid("delta", "must be positive"));
    }
    let f0: &dyn Fn(f64) -> f64 = &f0;
    let ode = Ode {
        f0,
        n: n as f64,
        delta,
    };
    let ergodic = radial_eigen(f0, n)?;
    let r_max = 4.0 * ergodic.r0 + 4.0;
    let step = 1e-4 * ergodic.r0;
    let miss = |a: f64| match ode.shoot(a, step, r_max) {
        Ok(s) => ode.accel(s.r, s.phi, s.dphi),
        Err(best) => best - 1.0,
    };

    let mut hi = (ergodic.lambda + 1.0) / delta;
    let mut tries = 0;
    while miss(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::ShootingFailed("no upper bracket for φ(0)".into()));
        }
    }
    let lo = 0.0;
    if miss(lo) >= 0.0 {
        return Err(Error::ShootingFailed(
            "φ(0) = 0 already reaches slope 1".into(),
        ));
    }
    // Bisection keeps the upper end, whose shot is known to reach slope 1.
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if miss(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = hi;
    let end = ode
        .shoot(a, step, r_max)
        .map_err(|_| Error::ShootingFailed("converged shot misses slope 1".into()))?;
    let r0 = end.r;

    let mut phi = Vec::with_capacity(r_grid.len());
    let mut dphi = Vec::with_capacity(r_grid.len());
    let mut d2phi = Vec::with_capacity(r_grid.len());
    let mut s = State {
        r: 0.0,
        phi: a,
        dphi: 0.0,
    };
    for &r in r_grid {
        if r <= r0 {
            if r > s.r {
                s = ode.advance(s, r, step);
            }
            phi.push(s.phi);
            dphi.push(s.dphi);
            d2phi.push(ode.accel(s.r, s.phi, s.dphi));
        } else {
            phi.push(end.phi + (r - r0));
            dphi.push(1.0);
            d2phi.push(0.0);
        }
    }
    Ok(RadialSolution {
        n,
        lambda: delta * a,
        r0,
        delta: Some(delta),
        r: r_grid.to_vec(),
        phi,
        dphi,
        d2phi,
        pasting_defect: ode.accel(end.r, end.phi, end.dphi).abs(),
    })
}
