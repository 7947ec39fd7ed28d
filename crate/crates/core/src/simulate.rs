//! Monte Carlo estimates of the long-run average cost of reflecting
//! `X = √2 W + ν` on the sphere of radius `r`.
//!
//! Path `p` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream `p`, so
//! adding paths never changes the existing ones and parallel runs are
//! bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dim: usize,
    /// Reflection radius.
    pub radius: f64,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            radius: 1.0,
            dt: 1e-4,
            horizon: 200.0,
            paths: 32,
            seed: 0,
            burn_in: 0.05,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.horizon >= 100.0 * self.dt && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be at least 100 time steps"));
        }
        if self.paths == 0 {
            return Err(invalid("paths", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(invalid("burn_in", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Total number of Euler steps and the index where averaging starts.
    fn steps(&self) -> (usize, usize) {
        let n = (self.horizon / self.dt).round() as usize;
        (n, (self.burn_in * n as f64).floor() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    /// `running_cost + local_time`.
    pub mean: f64,
    pub std_error: f64,
    pub running_cost: f64,
    pub local_time: f64,
}

/// Per-path time averages `(running cost, local time)`.
fn run_path(f: &CostFunction, config: &SimConfig, path: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(path as u64);
    let (n, start) = config.steps();
    let sigma = (2.0 * config.dt).sqrt();
    let r = config.radius;
    let mut x = vec![0.0; config.dim];
    let (mut running, mut local) = (0.0, 0.0);
    for step in 0..n {
        if step >= start {
            let fx = f.value(&x);
            if !fx.is_finite() {
                return Err(Error::NonFiniteSample { path, step });
            }
            running += fx * config.dt;
        }
        for xi in x.iter_mut() {
            let xi_k: f64 = StandardNormal.sample(&mut rng);
            *xi += sigma * xi_k;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > r {
            if step >= start {
                local += norm - r;
            }
            let s = r / norm;
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
    let elapsed = (n - start) as f64 * config.dt;
    Ok((running / elapsed, local / elapsed))
}

/// Estimates the ergodic cost of the ball policy of radius `config.radius`.
pub fn simulate_ball_policy(f: &CostFunction, config: &SimConfig) -> Result<ErgodicEstimate> {
    config.validate()?;
    if f.dim() != config.dim {
        return Err(Error::ShapeMismatch(format!(
            "cost has dimension {} but simulation has dimension {}",
            f.dim(),
            config.dim
        )));
    }
    let samples = (0..config.paths)
        .into_par_iter()
        .map(|p| run_path(f, config, p))
        .collect::<Result<Vec<_>>>()?;
    let p = samples.len() as f64;
    let running = samples.iter().map(|s| s.0).sum::<f64>() / p;
    let local = samples.iter().map(|s| s.1).sum::<f64>() / p;
    let mean = running + local;
    let std_error = if samples.len() > 1 {
        let var = samples
            .iter()
            .map(|s| (s.0 + s.1 - mean).powi(2))
            .sum::<f64>()
            / (p - 1.0);
        (var / p).sqrt()
    } else {
        0.0
    };
    Ok(ErgodicEstimate {
        mean,
        std_error,
        running_cost: running,
        local_time: local,
    })
}

/// Runs [`simulate_ball_policy`] once per radius with the same seed.
pub fn policy_sweep(
    f: &CostFunction,
    radii: &[f64],
    config: &SimConfig,
) -> Result<Vec<(f64, ErgodicEstimate)>> {
    if let Some(r) = radii.iter().find(|r| r.is_nan() || **r <= 0.0) {
        return Err(invalid("radii", format!("{r} is not positive")));
    }
    radii
        .iter()
        .map(|&radius| {
            let c = SimConfig { radius, ..*config };
            simulate_ball_policy(f, &c).map(|e| (radius, e))
        })
        .collect()
}

/// The empirical minimizer of a sweep.
pub fn sweep_argmin(sweep: &[(f64, ErgodicEstimate)]) -> Option<f64> {
    sweep
        .iter()
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .map(|s| s.0)
}
