use ergodic_hjb::direct::solve_constrained;
use ergodic_hjb::penalty::{beta, continuation, halving_schedule, solve_penalized, PenaltyConfig};
use ergodic_hjb::{CostFunction, Grid, ScalarField, SolverTolerances};
use proptest::prelude::*;

fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn config(end: f64, slack: f64) -> PenaltyConfig {
    PenaltyConfig {
        epsilon_schedule: halving_schedule(1e-1, end),
        damping: 1.0,
        tolerances: SolverTolerances {
            gradient_slack: slack,
            ..Default::default()
        },
    }
}

#[test]
fn beta_examples() {
    assert_eq!(beta(-1.0, 0.1).unwrap().0, 0.0);
    assert_eq!(beta(3.0, 1.0).unwrap().0, 2.0);
    for eps in [1e-3, 0.25, 2.0] {
        assert!((beta(eps, eps).unwrap().0 - 0.25).abs() < 1e-15);
    }
    assert!(beta(1.0, -1.0).is_err());
    assert!(beta(1.0, f64::NAN).is_err());
}

#[test]
fn small_penalty_matches_the_direct_solver() {
    let grid = Grid::new(1, 4.0, 401).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let tol = SolverTolerances::default();
    let direct = solve_constrained(&f, 1.0, &grid, &tol, None).unwrap();
    let mut warm = None;
    for eps in halving_schedule(1e-1, 1e-4) {
        warm = Some(
            solve_penalized(&f, 1.0, eps, &grid, warm.as_ref(), 1.0, &tol)
                .unwrap()
                .v,
        );
    }
    let err = sup_diff(&warm.unwrap(), &direct.u);
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn reflection_symmetric_cost_gives_a_symmetric_solution() {
    let grid = Grid::new(2, 3.0, 31).unwrap();
    let f = CostFunction::anisotropic(vec![1.0, 0.0, 0.0, 4.0], 2).unwrap();
    let tol = SolverTolerances::default();
    let v = solve_penalized(&f, 1.0, 1e-2, &grid, None, 1.0, &tol)
        .unwrap()
        .v;
    let m = grid.nodes_per_axis();
    for j in 0..m {
        for i in 0..m {
            let k = grid.index([i, j]);
            let flips = [[m - 1 - i, j], [i, m - 1 - j]];
            for idx in flips {
                let d = (v.get(k) - v.get(grid.index(idx))).abs();
                assert!(d <= 1e-8, "{d}");
            }
        }
    }
}

#[test]
fn cost_shift_moves_the_solution_by_shift_over_delta() {
    let grid = Grid::new(1, 3.0, 121).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let g = f.shifted(5.0).unwrap();
    let tol = SolverTolerances::default();
    for delta in [1.0, 0.25] {
        let a = solve_penalized(&f, delta, 1e-2, &grid, None, 1.0, &tol)
            .unwrap()
            .v;
        let b = solve_penalized(&g, delta, 1e-2, &grid, None, 1.0, &tol)
            .unwrap()
            .v;
        for k in 0..grid.len() {
            let d = b.get(k) - a.get(k) - 5.0 / delta;
            assert!(d.abs() <= 1e-8 * (1.0 + 5.0 / delta), "{d}");
        }
    }
}

#[test]
fn converged_warm_start_needs_at_most_one_step() {
    let grid = Grid::new(2, 2.0, 21).unwrap();
    let f = CostFunction::quadratic(2).unwrap();
    let tol = SolverTolerances::default();
    let first = solve_penalized(&f, 0.5, 5e-2, &grid, None, 1.0, &tol).unwrap();
    let again = solve_penalized(&f, 0.5, 5e-2, &grid, Some(&first.v), 1.0, &tol).unwrap();
    assert!(again.iterations <= 1, "{}", again.iterations);
}

#[test]
fn continuation_diagnostics() {
    let grid = Grid::new(1, 4.0, 401).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let (v, diag) = continuation(&f, 1.0, &grid, &config(1e-5, 8e-4)).unwrap();
    let levels = &diag.levels;
    assert!(levels.len() >= 4);
    let last = levels.last().unwrap();
    assert!(last.gradient_excess <= 8e-4);
    // Bounded β forces the excess down in step with ε.
    for l in levels {
        assert!(l.gradient_excess <= 20.0 * l.epsilon, "{l:?}");
    }

    // The penalty term stays bounded over the final levels.
    let tail: Vec<f64> = levels[levels.len() - 3..]
        .iter()
        .map(|l| l.max_penalty)
        .collect();
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi < 2.0 * lo, "{tail:?}");

    // Curvature normalized by 1 + |δv|∞ + |Dv|²∞ settles instead of growing.
    let dv = v.values().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let ratio: Vec<f64> = levels
        .iter()
        .map(|l| l.max_curvature / (1.0 + dv + 1.0 + l.gradient_excess))
        .collect();
    let n = ratio.len();
    let fitted = ratio[n - 3];
    assert!(ratio[n - 1] <= 1.01 * fitted, "{ratio:?}");
    assert!(ratio.iter().all(|&r| r <= 1.5 * ratio[0]), "{ratio:?}");

    // Warm starts make later levels cheap.
    assert!(levels[1..].iter().all(|l| l.newton_iterations <= 10));
}

#[test]
fn penalized_solution_dominates_the_subsolution_and_the_direct_solution() {
    let grid = Grid::new(1, 4.0, 401).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let tol = SolverTolerances::default();
    let k = 1.0 + f.max_on_unit_sphere();
    for delta in [1.0, 0.1] {
        let (v, _) = continuation(&f, delta, &grid, &config(1e-5, 8e-4)).unwrap();
        let u = solve_constrained(&f, delta, &grid, &tol, None).unwrap().u;
        for i in 0..grid.len() {
            let r = grid.radius(i);
            assert!(v.get(i) >= (r - k).max(0.0) - 1e-9);
            assert!(
                v.get(i) >= u.get(i) - 1e-3 / delta,
                "{} {}",
                v.get(i),
                u.get(i)
            );
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let grid = Grid::new(1, 2.0, 21).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let tol = SolverTolerances::default();
    assert!(solve_penalized(&f, 0.0, 1e-2, &grid, None, 1.0, &tol).is_err());
    assert!(solve_penalized(&f, 1.0, 0.0, &grid, None, 1.0, &tol).is_err());
    assert!(solve_penalized(&f, 1.0, 1e-2, &grid, None, 1.5, &tol).is_err());
    let f2 = CostFunction::quadratic(2).unwrap();
    assert!(solve_penalized(&f2, 1.0, 1e-2, &grid, None, 1.0, &tol).is_err());
    let other = Grid::new(1, 2.0, 41).unwrap().sample(|_| 0.0);
    assert!(solve_penalized(&f, 1.0, 1e-2, &grid, Some(&other), 1.0, &tol).is_err());
    let mut cfg = config(1e-3, 1e-12);
    cfg.tolerances.max_iters = 50;
    assert!(continuation(&f, 1.0, &grid, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn beta_is_monotone_convex_and_c1(z in -5.0f64..5.0, dz in 1e-6f64..1.0, eps in 1e-4f64..2.0) {
        let (b0, d0) = beta(z, eps).unwrap();
        let (b1, d1) = beta(z + dz, eps).unwrap();
        prop_assert!(b0 >= 0.0 && d0 >= 0.0);
        prop_assert!(b1 >= b0);
        prop_assert!(d1 >= d0);
        // Convexity: the tangent line lies below.
        prop_assert!(b1 >= b0 + d0 * dz - 1e-12 * (1.0 + b1.abs()));
        if z <= 0.0 {
            prop_assert_eq!(b0, 0.0);
        }
        if z > 2.0 * eps {
            prop_assert!((b0 - (z - eps) / eps).abs() <= 1e-12 * (1.0 + b0));
        }
    }

    #[test]
    fn beta_is_nonincreasing_in_epsilon(z in 0.0f64..5.0, e1 in 1e-3f64..2.0, e2 in 1e-3f64..2.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(beta(z, lo).unwrap().0 >= beta(z, hi).unwrap().0 - 1e-12);
    }
}
