use curvlab::closedforms::Conductivity;
use curvlab::elliptic::{
    solve_cartesian_2d, solve_confocal, solve_planar_fd, solve_radial_bessel, solve_radial_fd,
    transmission_residual, CartesianGrid2D, ConfocalGrid, GridOptions, PlanarGrid, RadialGrid,
    ScalarField,
};
use curvlab::geometry::Shape;

fn max_error_vs_bessel(dim: usize, lambda: f64, opts: &GridOptions) -> (f64, f64) {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(dim, 1.0).unwrap();
    let grid = RadialGrid::for_lambda(1.0, &cond, lambda, opts).unwrap();
    let fd = solve_radial_fd(&ball, &cond, lambda, &grid).unwrap();
    let exact = solve_radial_bessel(&ball, &cond, lambda).unwrap();
    let err = grid
        .nodes()
        .iter()
        .zip(fd.values())
        .map(|(&r, v)| (v - exact.value(r)).abs())
        .fold(0.0, f64::max);
    let i = grid.interface_index();
    (err, (fd.values()[i] - exact.interface_value()).abs())
}

#[test]
fn radial_fd_matches_bessel_oracle() {
    for dim in [2, 3] {
        for lambda in [1e2, 1e3, 1e4] {
            let (err, at_r) = max_error_vs_bessel(dim, lambda, &GridOptions::default());
            assert!(err < 1e-4, "dim {dim} lambda {lambda}: {err} at r = {at_r}");
        }
    }
}

fn uniform_grid(h: f64, r_max: f64) -> RadialGrid {
    RadialGrid::graded(1.0, r_max, h, 1.0, h).unwrap()
}

#[test]
fn radial_fd_convergence_orders() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let lambda = 100.0;
    let exact = solve_radial_bessel(&ball, &cond, lambda).unwrap();
    let mut away = Vec::new();
    let mut at_interface = Vec::new();
    let mut flux = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let grid = uniform_grid(h, 3.4);
        let f = solve_radial_fd(&ball, &cond, lambda, &grid).unwrap();
        let e = grid
            .nodes()
            .iter()
            .zip(f.values())
            .filter(|(r, _)| (*r - 1.0).abs() >= 0.2)
            .map(|(&r, v)| (v - exact.value(r)).abs())
            .fold(0.0, f64::max);
        away.push(e);
        at_interface.push((f.values()[grid.interface_index()] - exact.interface_value()).abs());
        flux.push(transmission_residual(&f, &ball, &cond).unwrap().flux_residual);
    }
    let order = |e: &[f64]| (e[1] / e[2]).log2();
    assert!(order(&away) >= 1.9, "away from the interface: {away:?}");
    assert!(order(&at_interface) >= 1.0, "interface node: {at_interface:?}");
    assert!(order(&flux) >= 1.0, "flux residual: {flux:?}");
}

#[test]
fn bessel_transmission_residual_vanishes() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    for dim in [2, 3] {
        let s = solve_radial_bessel(&Shape::ball(dim, 1.0).unwrap(), &cond, 1e4).unwrap();
        let r = s.transmission_residual();
        assert!(r.flux_residual < 1e-10 && r.jump_residual < 1e-10, "{r:?}");
    }
}

#[test]
fn equal_conductivities_give_c1_solution() {
    let cond = Conductivity::new(1.0, 1.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let mut kinks = Vec::new();
    for h in [0.02, 0.01] {
        let grid = uniform_grid(h, 3.0);
        let f = solve_radial_fd(&ball, &cond, 100.0, &grid).unwrap();
        let (r, v, i) = (grid.nodes(), f.values(), grid.interface_index());
        let left = (v[i] - v[i - 1]) / (r[i] - r[i - 1]);
        let right = (v[i + 1] - v[i]) / (r[i + 1] - r[i]);
        kinks.push((right - left).abs());
    }
    // two-point one-sided slopes differ by O(h)
    assert!(kinks[1] < 0.6 * kinks[0], "{kinks:?}");
    assert!(kinks[1] < 0.5);
}

#[test]
fn radial_and_planar_values_in_unit_interval() {
    let cond = Conductivity::new(3.0, 0.5).unwrap();
    for lambda in [1.0, 1e3, 1e6] {
        for dim in [2, 3] {
            let ball = Shape::ball(dim, 1.0).unwrap();
            let grid = RadialGrid::for_lambda(1.0, &cond, lambda, &GridOptions::default()).unwrap();
            let f = solve_radial_fd(&ball, &cond, lambda, &grid).unwrap();
            let n = f.values().len();
            // the last node carries the Dirichlet value 0
            let bad: Vec<_> = f.values()[..n - 1].iter().enumerate().filter(|(_, v)| !(-1e-12..=1.0 + 1e-12).contains(*v)).collect();
            assert!(bad.is_empty(), "dim {dim} lambda {lambda}: {:?} of {n}", &bad[..bad.len().min(5)]);
        }
        let hs = Shape::half_space(2).unwrap();
        let grid = PlanarGrid::for_lambda(&cond, lambda, &GridOptions::default()).unwrap();
        let f = solve_planar_fd(&hs, &cond, lambda, &grid).unwrap();
        let n = f.values().len();
        assert!(f.values()[1..n - 1].iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }
}

#[test]
fn planar_solution_is_the_flat_profile() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let hs = Shape::half_space(2).unwrap();
    let lambda = 1e4;
    let grid = PlanarGrid::for_lambda(&cond, lambda, &GridOptions::default()).unwrap();
    let f = solve_planar_fd(&hs, &cond, lambda, &grid).unwrap();
    for (s, v) in grid.nodes().iter().zip(f.values()) {
        let exact = curvlab::closedforms::phi_profile(lambda.sqrt() * s, &cond);
        assert!((v - exact).abs() < 1e-4, "s={s}");
    }
}

#[test]
fn cartesian_ball_converges_to_radial_solution() {
    // Centre sampling smears the interface over one cell, so the interface
    // values converge at first order in h.
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(2, 1.0).unwrap();
    let lambda = 4.0;
    let rg = RadialGrid::for_lambda(1.0, &cond, lambda, &GridOptions::default()).unwrap();
    let radial = solve_radial_fd(&ball, &cond, lambda, &rg).unwrap();
    let mut errs = Vec::new();
    let mut jumps = Vec::new();
    for nx in [200, 400] {
        let g = CartesianGrid2D::for_lambda(&ball, &cond, lambda, nx, 8.0).unwrap();
        let f = solve_cartesian_2d(&ball, &cond, lambda, &g).unwrap();
        assert!(f.values().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        let mut e: f64 = 0.0;
        for q in ball.interface_samples(64).unwrap() {
            e = e.max((f.value_at(&q).unwrap() - radial.value_at(&q).unwrap()).abs());
        }
        assert!(e < 0.3 * g.h(), "nx {nx}: {e} with h {}", g.h());
        errs.push(e);
        jumps.push(transmission_residual(&f, &ball, &cond).unwrap().jump_residual);
    }
    assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
    assert!(jumps[1] < 0.6 * jumps[0], "{jumps:?}");
}

#[test]
fn cartesian_equal_phases_interface_near_one_half() {
    let cond = Conductivity::new(1.0, 1.0).unwrap();
    let ball = Shape::ball(2, 1.0).unwrap();
    let lambda = 400.0;
    let g = CartesianGrid2D::for_lambda(&ball, &cond, lambda, 400, 8.0).unwrap();
    let f = solve_cartesian_2d(&ball, &cond, lambda, &g).unwrap();
    for q in ball.interface_samples(32).unwrap() {
        let u = f.value_at(&q).unwrap();
        assert!((u - 0.5).abs() < 2.0 / lambda.sqrt(), "{q:?}: {u}");
    }
}

#[test]
fn cartesian_rejects_thin_margin() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(2, 1.0).unwrap();
    let g = CartesianGrid2D::for_lambda(&ball, &cond, 4.0, 50, 2.0).unwrap();
    assert!(solve_cartesian_2d(&ball, &cond, 4.0, &g).is_err());
}

#[test]
fn confocal_agrees_with_cartesian_and_stays_in_range() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let el = Shape::ellipse(2.0, 1.0).unwrap();
    let lambda = 4.0;
    let cg = ConfocalGrid::for_lambda(&el, &cond, lambda, 256, &GridOptions::default()).unwrap();
    let conf = solve_confocal(&el, &cond, lambda, &cg).unwrap();
    assert!(conf.values().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    let g = CartesianGrid2D::for_lambda(&el, &cond, lambda, 400, 8.0).unwrap();
    let cart = solve_cartesian_2d(&el, &cond, lambda, &g).unwrap();
    let mut e: f64 = 0.0;
    for q in el.interface_samples(32).unwrap() {
        e = e.max((cart.value_at(&q).unwrap() - conf.value_at(&q).unwrap()).abs());
    }
    assert!(e < 0.5 * g.h(), "{e}");
    let tr = transmission_residual(&conf, &el, &cond).unwrap();
    assert!(tr.flux_residual < 1e-3, "{tr:?}");
}

#[test]
fn confocal_interface_values_approach_interface_constant() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let el = Shape::ellipse(2.0, 1.0).unwrap();
    let lambda = 1e5;
    let cg = ConfocalGrid::for_lambda(&el, &cond, lambda, 128, &GridOptions::default()).unwrap();
    let f = solve_confocal(&el, &cond, lambda, &cg).unwrap();
    for p in [[2.0, 0.0], [0.0, 1.0]] {
        let u = f.value_at(&p).unwrap();
        // within the curvature correction kappa / (3 sqrt(lambda)) of 1/3
        assert!((u - 1.0 / 3.0).abs() < 2.5 / lambda.sqrt(), "{p:?}: {u}");
    }
}

#[test]
fn field_csv_has_metadata_header() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let grid = uniform_grid(0.1, 2.0);
    let f = solve_radial_fd(&ball, &cond, 10.0, &grid).unwrap();
    let mut out = Vec::new();
    f.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# lambda=10 sigma_plus=1 sigma_minus=4 shape=ball(N=3;R=1)");
    assert_eq!(lines.next().unwrap(), "r,value");
    assert_eq!(lines.count(), grid.nodes().len());
}
