use ergodic_hjb::radial::radial_eigen;
use ergodic_hjb::simulate::{policy_sweep, simulate_ball_policy, sweep_argmin, SimConfig};
use ergodic_hjb::CostFunction;

fn config(dim: usize, radius: f64) -> SimConfig {
    SimConfig {
        dim,
        radius,
        dt: 1e-4,
        horizon: 200.0,
        paths: 32,
        seed: 7,
        burn_in: 0.05,
    }
}

/// Discretization allowance for the projected Euler scheme.
fn bias(cfg: &SimConfig) -> f64 {
    3.0 * cfg.dt.sqrt()
}

#[test]
fn optimal_radius_attains_the_eigenvalue() {
    for dim in [1, 2] {
        let f = CostFunction::quadratic(dim).unwrap();
        let e = radial_eigen(|r| r * r, dim).unwrap();
        let est = simulate_ball_policy(&f, &config(dim, e.r0)).unwrap();
        let err = (est.mean - e.lambda).abs();
        assert!(
            err <= 3.0 * est.std_error + 0.05,
            "dim {dim}: {est:?} vs {}",
            e.lambda
        );
    }
}

#[test]
fn oversized_ball_is_visibly_worse() {
    let f = CostFunction::quadratic(1).unwrap();
    let e = radial_eigen(|r| r * r, 1).unwrap();
    let est = simulate_ball_policy(&f, &config(1, 2.0 * e.r0)).unwrap();
    assert!(est.mean > e.lambda + 3.0 * est.std_error, "{est:?}");
}

#[test]
fn occupation_and_push_rates_match_the_uniform_law() {
    for dim in [1, 2] {
        let f = CostFunction::quadratic(dim).unwrap();
        for r in [0.8, 1.3] {
            let cfg = config(dim, r);
            let est = simulate_ball_policy(&f, &cfg).unwrap();
            // Uniform on the ball: E|X|² = n r²/(n + 2); push rate n/r.
            let n = dim as f64;
            let occupation = n * r * r / (n + 2.0);
            assert!(
                (est.running_cost - occupation).abs() <= 3.0 * est.std_error + bias(&cfg),
                "dim {dim}, r {r}: {est:?}"
            );
            assert!(
                (est.local_time - n / r).abs() <= 3.0 * est.std_error + 0.05,
                "dim {dim}, r {r}: {est:?}"
            );
        }
    }
}

#[test]
fn identical_inputs_give_identical_estimates() {
    let f = CostFunction::quadratic(2).unwrap();
    let cfg = SimConfig {
        horizon: 20.0,
        ..config(2, 1.2)
    };
    let a = simulate_ball_policy(&f, &cfg).unwrap();
    let b = simulate_ball_policy(&f, &cfg).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    let c = simulate_ball_policy(&f, &SimConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn cost_shift_moves_the_estimate() {
    let f = CostFunction::quadratic(1).unwrap();
    let g = f.shifted(4.0).unwrap();
    let cfg = SimConfig {
        horizon: 20.0,
        ..config(1, 1.0)
    };
    let a = simulate_ball_policy(&f, &cfg).unwrap();
    let b = simulate_ball_policy(&g, &cfg).unwrap();
    assert!((b.mean - a.mean - 4.0).abs() <= 1e-12);
    assert_eq!(a.local_time, b.local_time);
}

#[test]
fn sweep_finds_the_optimal_radius() {
    let f = CostFunction::quadratic(1).unwrap();
    let e = radial_eigen(|r| r * r, 1).unwrap();
    let radii = [0.8, 1.0, 1.145, 1.3, 1.6];
    let sweep = policy_sweep(&f, &radii, &config(1, 1.0)).unwrap();
    assert_eq!(sweep_argmin(&sweep), Some(1.145));
    for w in sweep.windows(2) {
        assert!(w[1].1.local_time < w[0].1.local_time);
    }
    for (r, est) in &sweep {
        assert!(
            est.mean >= e.lambda - 3.0 * est.std_error - 0.05,
            "r {r}: {est:?}"
        );
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let f = CostFunction::quadratic(1).unwrap();
    assert!(simulate_ball_policy(&f, &config(2, 1.0)).is_err());
    for bad in [
        SimConfig {
            radius: 0.0,
            ..config(1, 1.0)
        },
        SimConfig {
            dt: -1.0,
            ..config(1, 1.0)
        },
        SimConfig {
            horizon: 1e-3,
            ..config(1, 1.0)
        },
        SimConfig {
            paths: 0,
            ..config(1, 1.0)
        },
        SimConfig {
            burn_in: 1.0,
            ..config(1, 1.0)
        },
    ] {
        assert!(simulate_ball_policy(&f, &bad).is_err());
    }
    assert!(policy_sweep(&f, &[1.0, -1.0], &config(1, 1.0)).is_err());
}
