use ergodic_hjb::calculus::{min_second_difference, second_difference};
use ergodic_hjb::direct::{
    lipschitz_extension_over, lipschitz_extension_residual, solve_constrained,
};
use ergodic_hjb::{CostFunction, Grid, SolverTolerances};
use proptest::prelude::*;

fn tol() -> SolverTolerances {
    SolverTolerances::default()
}

#[test]
fn active_set_stays_outside_a_fixed_ball() {
    let grid = Grid::new(1, 4.0, 401).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let mut radii = Vec::new();
    for k in 0..8 {
        let delta = 0.5f64.powi(k);
        let sol = solve_constrained(&f, delta, &grid, &tol(), None).unwrap();
        assert!(sol.converged);
        let c = sol.constants.c;
        for i in 0..grid.len() {
            if sol.active[i] {
                assert!(grid.radius(i) >= c);
            }
        }
        radii.push(c);
    }
    let hi = radii.iter().copied().fold(0.0, f64::max);
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi <= 2.0 && lo >= 0.5, "{radii:?}");
}

#[test]
fn solution_lies_between_sub_and_supersolution() {
    for (dim, m) in [(1, 401), (2, 41)] {
        let grid = Grid::new(dim, 4.0, m).unwrap();
        let f = CostFunction::quadratic(dim).unwrap();
        for delta in [1.0, 0.1, 0.01] {
            let sol = solve_constrained(&f, delta, &grid, &tol(), None).unwrap();
            assert!(sol.subsolution_gap() >= -1e-9, "{}", sol.subsolution_gap());
            assert!(
                sol.supersolution_gap() >= -1e-9,
                "{}",
                sol.supersolution_gap()
            );
            assert!(sol.satisfies_complementarity(1e-7), "{:?}", sol.residuals);
        }
    }
}

#[test]
fn eikonal_region_is_the_lipschitz_extension() {
    for (dim, m) in [(1, 401), (2, 61)] {
        let grid = Grid::new(dim, 3.0, m).unwrap();
        let h = grid.spacing();
        let f = CostFunction::quadratic(dim).unwrap();
        let sol = solve_constrained(&f, 0.5, &grid, &tol(), None).unwrap();
        let r = lipschitz_extension_residual(&sol);
        assert!(r <= 2.0 * h, "dim {dim}: {r}");

        // Lifting the eikonal nodes away from the free region by 1 breaks
        // the extension by about 1.
        let inactive: Vec<bool> = (0..grid.len())
            .map(|k| !grid.is_boundary(k) && !sol.active[k])
            .collect();
        let near = |k: usize| {
            let [i, j] = grid.multi_index(k);
            (0..grid.len()).any(|q| {
                let [a, b] = grid.multi_index(q);
                inactive[q] && i.abs_diff(a) + j.abs_diff(b) <= 1
            })
        };
        let far: Vec<usize> = (0..grid.len())
            .filter(|&k| !grid.is_boundary(k) && sol.active[k] && !near(k))
            .collect();
        let lifted =
            grid.sample_indexed(|k| sol.u.get(k) + if far.contains(&k) { 1.0 } else { 0.0 });
        let broken = lipschitz_extension_over(&lifted, &inactive, &far);
        assert!(broken >= 1.0 - 2.0 * h, "dim {dim}: {broken}");
    }
}

#[test]
fn cost_shift_adds_shift_over_delta() {
    let grid = Grid::new(2, 3.0, 31).unwrap();
    let f = CostFunction::quadratic(2).unwrap();
    for (c, delta) in [(3.0, 1.0), (0.5, 0.25), (10.0, 0.05)] {
        let g = f.shifted(c).unwrap();
        let a = solve_constrained(&f, delta, &grid, &tol(), None).unwrap();
        let b = solve_constrained(&g, delta, &grid, &tol(), None).unwrap();
        assert_eq!(a.active, b.active);
        for k in 0..grid.len() {
            let d = b.u.get(k) - a.u.get(k) - c / delta;
            assert!(d.abs() <= 1e-8 * (1.0 + (c / delta).abs()), "{d}");
        }
    }
    // A negative minimum is lifted back to zero.
    let lifted = f.shifted(-0.5).unwrap();
    let a = solve_constrained(&f, 0.5, &grid, &tol(), None).unwrap();
    let b = solve_constrained(&lifted, 0.5, &grid, &tol(), None).unwrap();
    assert_eq!(a.u, b.u);
}

#[test]
fn far_field_curvature_decays() {
    let grid = Grid::new(2, 4.0, 81).unwrap();
    let h = grid.spacing();
    let f = CostFunction::quadratic(2).unwrap();
    let sol = solve_constrained(&f, 0.25, &grid, &tol(), None).unwrap();
    let c = sol.constants.c;
    let dxx = second_difference(&sol.u, [1, 0]).unwrap();
    let dyy = second_difference(&sol.u, [0, 1]).unwrap();
    let mut checked = 0;
    for k in 0..grid.len() {
        let r = grid.radius(k);
        if grid.is_boundary(k) || grid.is_boundary_ring(k) || r <= c + 4.0 * h {
            continue;
        }
        let curv = dxx.get(k).max(dyy.get(k)) / (h * h);
        assert!(curv <= 1.0 / (r - c) + 10.0 * h, "r={r}: {curv}");
        checked += 1;
    }
    assert!(checked > 1000);
}

#[test]
fn curvature_bound_is_uniform_in_delta() {
    let grid = Grid::new(1, 4.0, 401).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    let l: Vec<f64> = (0..10)
        .map(|k| {
            let sol = solve_constrained(&f, 0.5f64.powi(k), &grid, &tol(), None).unwrap();
            sol.constants.l
        })
        .collect();
    let hi = l.iter().copied().fold(0.0, f64::max);
    let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi <= 2.0 * lo, "{l:?}");
}

#[test]
fn rejects_bad_inputs() {
    let grid = Grid::new(1, 2.0, 21).unwrap();
    let f = CostFunction::quadratic(1).unwrap();
    assert!(solve_constrained(&f, 0.0, &grid, &tol(), None).is_err());
    assert!(solve_constrained(&f, f64::NAN, &grid, &tol(), None).is_err());
    let f2 = CostFunction::quadratic(2).unwrap();
    assert!(solve_constrained(&f2, 1.0, &grid, &tol(), None).is_err());
    let mut bad = tol();
    bad.max_iters = 0;
    assert!(solve_constrained(&f, 1.0, &grid, &bad, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn comparison_principle(a in 1.0f64..4.0, delta in 0.05f64..2.0) {
        let grid = Grid::new(1, 4.0, 201).unwrap();
        let f1 = CostFunction::quadratic(1).unwrap();
        let f2 = CostFunction::power(a, 2.0, 1).unwrap();
        let u1 = solve_constrained(&f1, delta, &grid, &tol(), None).unwrap().u;
        let u2 = solve_constrained(&f2, delta, &grid, &tol(), None).unwrap().u;
        for k in 0..grid.len() {
            prop_assert!(u1.get(k) <= u2.get(k) + 1e-8 * (1.0 + u2.get(k).abs()));
        }
    }

    #[test]
    fn one_dimensional_solutions_are_convex(a in 0.5f64..3.0, p in 1.5f64..4.0, delta in 0.05f64..2.0) {
        let grid = Grid::new(1, 4.0, 201).unwrap();
        let f = CostFunction::power(a, p, 1).unwrap();
        let sol = solve_constrained(&f, delta, &grid, &tol(), None).unwrap();
        let c = sol.u.min();
        let osc = sol.u.max() - c;
        let w = sol.u.add_constant(-c);
        prop_assert!(min_second_difference(&w) >= -1e-8 * osc.max(1.0));
    }
}
