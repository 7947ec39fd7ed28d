use ergodic_hjb::bounds::far_field_pairs;
use ergodic_hjb::direct::solve_constrained;
use ergodic_hjb::discount::{
    base_point_insensitivity, dyadic_schedule, free_boundary, run_vanishing_discount,
    solve_discounted, Backend, DiscountConfig,
};
use ergodic_hjb::radial::radial_eigen;
use ergodic_hjb::{CostFunction, Error, Grid, SolverTolerances};

fn quadratic_1d() -> (CostFunction, Grid) {
    (
        CostFunction::quadratic(1).unwrap(),
        Grid::new(1, 4.0, 801).unwrap(),
    )
}

#[test]
fn one_dimensional_eigenvalue() {
    let (f, grid) = quadratic_1d();
    let eig = run_vanishing_discount(&f, &grid, &DiscountConfig::default()).unwrap();
    let exact = radial_eigen(|r| r * r, 1).unwrap().lambda;
    assert!(
        (eig.lambda_star - exact).abs() <= 1e-3,
        "{}",
        eig.lambda_star
    );
    assert!(!eig.non_cauchy);
    assert_eq!(eig.backend, "direct");
    // Normalized at the minimizer, which sits at the origin.
    assert!(eig.u_star.min().abs() <= 1e-12);
    assert!(grid.radius(eig.u_star.argmin()) <= grid.spacing());
}

#[test]
fn lambda_sequence_stays_in_the_a_priori_range() {
    let (f, grid) = quadratic_1d();
    let eig = run_vanishing_discount(&f, &grid, &DiscountConfig::default()).unwrap();
    let k = 1.0 + f.max_on_unit_sphere();
    let c = eig.last.constants.c;
    for l in eig.lambdas() {
        assert!((0.0..=k + c).contains(&l), "{l}");
    }
}

#[test]
fn cost_shift_moves_the_eigenvalue_and_keeps_the_field() {
    let (f, grid) = quadratic_1d();
    let cfg = DiscountConfig::default();
    let a = run_vanishing_discount(&f, &grid, &cfg).unwrap();
    let b = run_vanishing_discount(&f.shifted(2.5).unwrap(), &grid, &cfg).unwrap();
    // Step by step along the common part of the schedule.
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!(x.delta, y.delta);
        assert!((y.lambda - x.lambda - 2.5).abs() <= 1e-8, "{x:?} {y:?}");
    }
    // The stopping rule is relative, so the shifted run may stop elsewhere.
    assert!((b.lambda_star - a.lambda_star - 2.5).abs() <= 1e-4 * (1.0 + b.lambda_star));
    assert!(a.u_star.sup_distance(&b.u_star).unwrap() <= 1e-3);
}

#[test]
fn base_point_dependence_vanishes_with_delta() {
    let (f, grid) = quadratic_1d();
    let sol = solve_constrained(&f, 1e-3, &grid, &SolverTolerances::default(), None).unwrap();
    let x0 = grid.index([300, 0]);
    let y0 = grid.index([500, 0]);
    assert!((grid.coord(500) - grid.coord(300) - 2.0).abs() < 1e-12);
    let d = base_point_insensitivity(&sol, x0, y0);
    assert!(d <= 2.1e-3, "{d}");
    let mirror = grid.index([800 - 300, 0]);
    assert!(base_point_insensitivity(&sol, x0, mirror) <= 1e-12);
}

#[test]
fn free_boundary_matches_the_radial_contact_point() {
    let (f, grid) = quadratic_1d();
    let eig = run_vanishing_discount(&f, &grid, &DiscountConfig::default()).unwrap();
    let r0 = radial_eigen(|r| r * r, 1).unwrap().r0;
    let r = eig.free_boundary_radius();
    assert!((r - r0).abs() <= 2.0 * grid.spacing(), "{r} vs {r0}");
    // The mask is an interval around the origin.
    let inside: Vec<usize> = (0..grid.len()).filter(|&k| eig.free_boundary[k]).collect();
    assert!(inside.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn two_dimensional_mask_is_invariant_under_the_grid_symmetries() {
    let f = CostFunction::quadratic(2).unwrap();
    let grid = Grid::new(2, 3.0, 41).unwrap();
    let eig = run_vanishing_discount(&f, &grid, &DiscountConfig::default()).unwrap();
    let m = grid.nodes_per_axis();
    let mask = &eig.free_boundary;
    for j in 0..m {
        for i in 0..m {
            let k = grid.index([i, j]);
            for idx in [[j, i], [m - 1 - i, j], [i, m - 1 - j]] {
                assert_eq!(mask[k], mask[grid.index(idx)]);
            }
        }
    }
}

#[test]
fn growth_is_unit_slope_along_rays() {
    let f = CostFunction::quadratic(2).unwrap();
    let grid = Grid::new(2, 4.0, 81).unwrap();
    let eig = run_vanishing_discount(&f, &grid, &DiscountConfig::default()).unwrap();
    let slack = 0.05;
    let pairs = far_field_pairs(&grid);
    assert!(!pairs.is_empty());
    for (outer, inner) in pairs {
        let dist = {
            let (p, q) = (grid.point(outer), grid.point(inner));
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        };
        let slope = (eig.u_star.get(outer) - eig.u_star.get(inner)) / dist;
        assert!((1.0 - slack..=1.0 + slack).contains(&slope), "{slope}");
    }
}

#[test]
fn contact_radius_is_stable_under_refinement() {
    let f = CostFunction::quadratic(1).unwrap();
    let radii: Vec<f64> = [201, 401, 801]
        .into_iter()
        .map(|m| {
            let grid = Grid::new(1, 4.0, m).unwrap();
            run_vanishing_discount(&f, &grid, &DiscountConfig::default())
                .unwrap()
                .free_boundary_radius()
        })
        .collect();
    assert!((radii[0] - radii[2]).abs() <= 0.1, "{radii:?}");
    assert!((radii[1] - radii[2]).abs() <= 0.05, "{radii:?}");
}

#[test]
fn penalty_backend_solves_one_discounted_problem() {
    let f = CostFunction::quadratic(1).unwrap();
    let grid = Grid::new(1, 4.0, 201).unwrap();
    let cfg = DiscountConfig {
        backend: Backend::Penalty(Default::default()),
        ..Default::default()
    };
    let sol = solve_discounted(&f, 1.0, &grid, &cfg).unwrap();
    let direct = solve_discounted(&f, 1.0, &grid, &DiscountConfig::default()).unwrap();
    assert!(sol.u.sup_distance(&direct.u).unwrap() <= 1e-2);
}

#[test]
fn failures_are_reported() {
    let (f, grid) = quadratic_1d();
    let short = DiscountConfig {
        schedule: dyadic_schedule(1),
        ..Default::default()
    };
    assert!(matches!(
        run_vanishing_discount(&f, &grid, &short),
        Err(Error::DiscountNotConverged { .. })
    ));
    let f2 = CostFunction::quadratic(2).unwrap();
    assert!(run_vanishing_discount(&f2, &grid, &DiscountConfig::default()).is_err());
    let steep = grid.sample(|x| 2.0 * x[0] + 3.0);
    assert!(matches!(
        free_boundary(&steep, 1e-6),
        Err(Error::EmptyFreeBoundary)
    ));
}
