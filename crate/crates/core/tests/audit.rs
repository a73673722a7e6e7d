use curvlab::audit::{
    barrier_check_elliptic, barrier_check_elliptic_at, barrier_check_parabolic, calibrate_k, calibrate_k_with,
    k_one, maximum_principle_check, maximum_principle_field, maximum_principle_trace,
};
use curvlab::closedforms::{phi_profile, Conductivity};
use curvlab::elliptic::{
    solve_radial_bessel, solve_radial_fd, FieldParameter, GridOptions, PlanarGrid, RadialGrid,
};
use curvlab::geometry::Shape;
use curvlab::parabolic::{
    solve_planar_parabolic_with_estimate, solve_radial_parabolic_with_estimate, TimeGrid, TimeTrace, DEFAULT_TIME_FINEST_FACTOR,
};
use std::f64::consts::PI;

fn ball_run(cond: &Conductivity) -> (Shape, curvlab::parabolic::ParabolicRun) {
    let ball = Shape::ball(3, 1.0).unwrap();
    let tg = TimeGrid::for_shape(&ball, cond).unwrap();
    let g = RadialGrid::for_time(1.0, cond, &tg, DEFAULT_TIME_FINEST_FACTOR).unwrap();
    let snaps = [tg.t0(), 1e-3, 1e-2, tg.t_max()];
    let run = solve_radial_parabolic_with_estimate(&ball, cond, &g, &tg, &snaps).unwrap();
    (ball, run)
}

#[test]
fn calibrated_k_hand_values() {
    // 4 s+ s- / S = 8/3 and max|Lap(delta)| = 2/(1 - 1/2) = 4 on the tube of half-width 1/2
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let k1 = k_one(&ball, &cond, 0.5).unwrap();
    assert!((k1 - 8.0 / 3.0 * 4.0 / (2.0 * PI.sqrt())).abs() < 1e-13, "{k1}");
    assert!((calibrate_k(&ball, &cond).unwrap() - 2.0 * k1).abs() < 1e-13);
    assert!((calibrate_k_with(&ball, &cond, 0.5, 3.0).unwrap() - 3.0 * k1).abs() < 1e-13);
    assert!(calibrate_k_with(&ball, &cond, 0.5, 0.5).is_err());
}

#[test]
fn parabolic_barrier_holds_with_calibrated_k() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let (ball, run) = ball_run(&cond);
    let k = calibrate_k(&ball, &cond).unwrap();
    let rep = barrier_check_parabolic(&run.traces, &run.snapshots, &ball, &cond, k).unwrap();
    assert!(rep.passed(), "{rep}");
    assert!(rep.samples > 100);
}

#[test]
fn parabolic_barrier_fails_without_k_on_the_interface() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let (ball, run) = ball_run(&cond);
    let rep = barrier_check_parabolic(&run.traces, &run.snapshots, &ball, &cond, 0.0).unwrap();
    assert!(!rep.passed(), "{rep}");
    let w = rep.witness.unwrap();
    // the curvature drift is largest at late times near the interface
    let r = w.point.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!((r - 1.0).abs() <= 0.5, "{w:?}");
    assert!(matches!(w.parameter, FieldParameter::Time(t) if t > 1e-3), "{w:?}");
}

#[test]
fn flat_interface_needs_no_k() {
    for (sp, sm) in [(1.0, 1.0), (1.0, 4.0)] {
        let cond = Conductivity::new(sp, sm).unwrap();
        let hs = Shape::half_space(3).unwrap();
        assert_eq!(calibrate_k(&hs, &cond).unwrap(), 0.0);
        let tg = TimeGrid::geometric(1e-4, 1.0, 1.15).unwrap();
        let grid = PlanarGrid::for_time(&cond, &tg, 0.05).unwrap();
        let run = solve_planar_parabolic_with_estimate(&hs, &cond, &grid, &tg).unwrap();
        let rep = barrier_check_parabolic(&run.traces, &[], &hs, &cond, 0.0).unwrap();
        assert!(rep.passed(), "sigma ({sp}, {sm}): {rep}");
    }
}

#[test]
fn elliptic_barrier_on_the_bessel_solution() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let k = calibrate_k(&ball, &cond).unwrap();
    let pts: Vec<Vec<f64>> = (0..=200).map(|i| vec![0.5 + i as f64 / 200.0, 0.0, 0.0]).collect();
    for lambda in [1e2, 1e3, 1e4] {
        let exact = solve_radial_bessel(&ball, &cond, lambda).unwrap();
        let rep = barrier_check_elliptic_at(&exact, &pts, &ball, &cond, k, lambda, 1e-12).unwrap();
        assert!(rep.passed(), "lambda {lambda}: {rep}");
        let rep0 = barrier_check_elliptic_at(&exact, &pts, &ball, &cond, 0.0, lambda, 1e-12).unwrap();
        assert!(!rep0.passed(), "lambda {lambda}: {rep0}");
    }
}

#[test]
fn elliptic_barrier_on_the_fd_field() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(2, 1.0).unwrap();
    let k = calibrate_k(&ball, &cond).unwrap();
    let lambda = 1e3;
    let grid = RadialGrid::for_lambda(1.0, &cond, lambda, &GridOptions::default()).unwrap();
    let f = solve_radial_fd(&ball, &cond, lambda, &grid).unwrap();
    let rep = barrier_check_elliptic(&f, &ball, &cond, k).unwrap();
    assert!(rep.passed(), "{rep}");
    assert!(barrier_check_parabolic(&[], &[f], &ball, &cond, k).is_err());
}

#[test]
fn flat_profile_meets_the_elliptic_barrier_with_zero_k() {
    let cond = Conductivity::new(2.0, 0.5).unwrap();
    let hs = Shape::half_space(2).unwrap();
    let lambda: f64 = 50.0;
    let profile = |x: &[f64]| Ok(phi_profile(lambda.sqrt() * x[1], &cond));
    let pts: Vec<Vec<f64>> = (0..=100).map(|i| vec![0.3, -2.0 + 0.04 * i as f64]).collect();
    let rep = barrier_check_elliptic_at(&profile, &pts, &hs, &cond, 0.0, lambda, 1e-12).unwrap();
    assert!(rep.passed(), "{rep}");
}

#[test]
fn maximum_principle_names_the_offending_location() {
    let mut samples: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![i as f64, 0.0], 0.1 * i as f64)).collect();
    assert!(maximum_principle_check(&samples).passed());
    samples[7].1 = 1.001;
    let r = maximum_principle_check(&samples);
    assert!(!r.passed());
    assert_eq!(r.max_at, vec![7.0, 0.0]);
    assert!(r.to_string().contains("FAIL"));
}

#[test]
fn indicator_data_touches_the_bounds_and_passes() {
    let samples = vec![(vec![0.0], 1.0), (vec![2.0], 0.0)];
    let r = maximum_principle_check(&samples);
    assert!(r.passed() && r.touches_bounds);
}

#[test]
fn solver_output_satisfies_the_maximum_principle() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let (_, run) = ball_run(&cond);
    for f in &run.snapshots {
        assert!(maximum_principle_field(f).passed());
    }
    let r = maximum_principle_trace(run.trace());
    assert!(r.passed() && !r.touches_bounds, "{r}");
    let bad = TimeTrace::from_samples(vec![1.0], vec![1.0, 2.0], vec![0.5, -0.01], cond).unwrap();
    let r = maximum_principle_trace(&bad);
    assert!(!r.passed());
    assert_eq!(r.min_at, vec![1.0, 2.0]);
}

#[test]
fn report_csv_has_witness_columns() {
    let cond = Conductivity::new(1.0, 4.0).unwrap();
    let ball = Shape::ball(3, 1.0).unwrap();
    let exact = solve_radial_bessel(&ball, &cond, 100.0).unwrap();
    let rep = barrier_check_elliptic_at(&exact, &[vec![1.0, 0.0, 0.0]], &ball, &cond, 0.0, 100.0, 0.0).unwrap();
    let mut out = Vec::new();
    rep.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("lemma,k,samples,max_violation,passed,witness_point"));
    assert!(lines[1].starts_with("lemma5.1,0,1,"));
    assert!(lines[1].contains(",false,1;0;0,lambda=100,"));
}
