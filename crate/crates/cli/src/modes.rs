use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use curvlab::asymptotics::{
    expected_limit, extract_mean_curvature, extrapolate_lambda_functional, extrapolate_time_functional,
    karamata_check, lambda_functional, time_functional, ExtrapolationResult, Functional, MeasureTrace, TimeLimit,
};
use curvlab::audit::{
    barrier_check_elliptic, barrier_check_parabolic, calibrate_k_with, default_half_width,
    maximum_principle_field, maximum_principle_trace, BarrierReport, BARRIER_CSV_HEADER,
};
use curvlab::closedforms::psi_lambda;
use curvlab::csvio::{format_g17, write_metadata};
use curvlab::elliptic::{
    solve_confocal, solve_planar_fd, solve_planar_fd_with_estimate, solve_radial_bessel, solve_radial_fd,
    solve_radial_fd_with_estimate, ConfocalGrid, Field, GridOptions, PlanarGrid, RadialGrid, ScalarField,
};
use curvlab::parabolic::{
    solve_planar_parabolic_with_estimate, solve_radial_parabolic_with_estimate, ParabolicRun, TimeGrid,
    DEFAULT_TIME_FINEST_FACTOR,
};
use curvlab::specfun::gamma_fn;
use curvlab::{Conductivity, Shape};

use crate::config::{Measure, Mode, RunConfig, Solver};
use crate::report::{Outputs, Report, RunError};

/// Absolute floor for checks whose expected value is zero.
const NULL_TOL: f64 = 1e-10;
/// Confocal interface spacing factor used by the ellipse scan.
const ELLIPSE_FINEST_FACTOR: f64 = 0.005;
/// Time-functional ladder: ratio and length.
const TIME_LADDER: (f64, usize) = (4.0, 3);

pub fn run_mode(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    match cfg.mode {
        Mode::VerifyElliptic => verify_elliptic(cfg, out),
        Mode::VerifyParabolic => verify_parabolic(cfg, out),
        Mode::EllipseScan => ellipse_scan(cfg, out),
        Mode::BarrierAudit => barrier_audit(cfg, out),
        Mode::KaramataCheck => karamata(cfg, out),
        Mode::Sweep => sweep(cfg, out),
    }
}

fn g(v: f64) -> String {
    // no "-0" in reports
    format_g17(v + 0.0)
}

fn interface_point(shape: &Shape) -> Vec<f64> {
    let mut q = vec![0.0; shape.dim()];
    if let Shape::Ball { radius, .. } = *shape {
        q[0] = radius;
    }
    q
}

fn metadata(cfg: &RunConfig, w: &mut dyn Write) -> std::io::Result<()> {
    write_metadata(
        w,
        &[
            ("shape", cfg.shape.label()),
            ("sigma_plus", g(cfg.cond.sigma_plus())),
            ("sigma_minus", g(cfg.cond.sigma_minus())),
        ],
    )
}

fn range_check(report: &mut Report, label: &str, fields: &[Field]) {
    let bad: Vec<String> = fields
        .iter()
        .map(maximum_principle_field)
        .filter(|r| !r.passed())
        .map(|r| r.to_string())
        .collect();
    report.check(
        format!("{label}-in-unit-interval"),
        bad.is_empty(),
        if bad.is_empty() { format!("fields={}", fields.len()) } else { bad.join("; ") },
    );
}

/// `|value - expected| <= tol |expected|`, or `<= floor` for a null target.
fn limit_check(value: f64, expected: f64, tol: f64, floor: f64) -> bool {
    let err = (value - expected).abs();
    if expected == 0.0 {
        err <= floor
    } else {
        err <= tol * expected.abs()
    }
}

fn lambda_sequence(cfg: &RunConfig, shape: &Shape, cond: &Conductivity, fields: &mut Vec<Field>) -> Result<Vec<(f64, f64)>, RunError> {
    let q = interface_point(shape);
    let mut u = Vec::with_capacity(cfg.lambdas.len());
    for &l in &cfg.lambdas {
        let v = match (shape, cfg.solver) {
            (Shape::Ball { .. }, Solver::Oracle) => solve_radial_bessel(shape, cond, l)?.interface_value(),
            (Shape::Ball { radius, .. }, Solver::Fd) => {
                let grid = RadialGrid::for_lambda(*radius, cond, l, &GridOptions::default())?;
                let f = solve_radial_fd(shape, cond, l, &grid)?;
                let v = f.values()[grid.interface_index()];
                fields.push(f);
                v
            }
            (Shape::HalfSpace { .. }, Solver::Oracle) => psi_lambda(&q, l, shape, cond)?,
            (Shape::HalfSpace { .. }, Solver::Fd) => {
                let grid = PlanarGrid::for_lambda(cond, l, &GridOptions::default())?;
                let f = solve_planar_fd(shape, cond, l, &grid)?;
                let v = f.values()[grid.interface_index()];
                fields.push(f);
                v
            }
            _ => unreachable!("shape checked by the config"),
        };
        u.push((l, v));
    }
    Ok(u)
}

fn write_extrapolation(out: &Outputs, name: &str, cfg: &RunConfig, ex: &ExtrapolationResult, params: &[f64], expected: f64) -> Result<(), RunError> {
    out.csv(name, |w| {
        metadata(cfg, w)?;
        ex.write_report_csv(w, Some(params), expected)
    })?;
    Ok(())
}

fn verify_elliptic(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let (shape, cond) = (&cfg.shape, &cfg.cond);
    let mut report = Report::default();
    let mut fields = Vec::new();
    let u = lambda_sequence(cfg, shape, cond, &mut fields)?;
    let lf = lambda_functional(&u, cond)?;
    let ex = extrapolate_lambda_functional(&lf)?;
    let q = interface_point(shape);
    let expected = expected_limit(Functional::Lambda, shape, &q, cond)?;
    let lambdas: Vec<f64> = lf.iter().map(|p| p.0).collect();
    write_extrapolation(out, "lambda_functional.csv", cfg, &ex, &lambdas, expected)?;
    let limit = ex.limit_estimate;
    report.note(format!("lambda_limit = {} +- {}", g(limit), g(ex.error_estimate)));
    if let Ok(h) = extract_mean_curvature(Functional::Lambda, limit, shape.dim(), cond) {
        report.note(format!("extracted_mean_curvature = {}", g(h)));
    }
    report.check(
        "lambda-limit",
        limit_check(limit, expected, cfg.tolerance, NULL_TOL),
        format!("limit={} expected={} abs_err={} tolerance={}", g(limit), g(expected), g((limit - expected).abs()), g(cfg.tolerance)),
    );
    if !fields.is_empty() {
        range_check(&mut report, "fd", &fields);
    }
    Ok(report)
}

fn time_grid(cfg: &RunConfig) -> Result<TimeGrid, RunError> {
    let tg = TimeGrid::for_shape(&cfg.shape, &cfg.cond)?;
    Ok(TimeGrid::geometric(tg.t0(), tg.t_max(), cfg.time_ratio)?)
}

fn parabolic_run(cfg: &RunConfig, tg: &TimeGrid, snapshot_times: &[f64]) -> Result<ParabolicRun, RunError> {
    let ff = cfg.finest_factor.unwrap_or(DEFAULT_TIME_FINEST_FACTOR);
    let (shape, cond) = (&cfg.shape, &cfg.cond);
    Ok(match *shape {
        Shape::Ball { radius, .. } => {
            let grid = RadialGrid::for_time(radius, cond, tg, ff)?;
            solve_radial_parabolic_with_estimate(shape, cond, &grid, tg, snapshot_times)?
        }
        Shape::HalfSpace { .. } => {
            let grid = PlanarGrid::for_time(cond, tg, ff)?;
            solve_planar_parabolic_with_estimate(shape, cond, &grid, tg)?
        }
        Shape::Ellipse2D { .. } => unreachable!("shape checked by the config"),
    })
}

fn verify_parabolic(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let (shape, cond) = (&cfg.shape, &cfg.cond);
    let mut report = Report::default();
    let tg = time_grid(cfg)?;
    let run = parabolic_run(cfg, &tg, &[])?;
    for w in &run.warnings {
        report.note(format!("warning {w}"));
    }
    let trace = run.trace();
    out.csv("trace.csv", |w| trace.write_csv(w))?;
    let tf = time_functional(trace, cond)?;
    let lim: TimeLimit = extrapolate_time_functional(&tf, TIME_LADDER.0, TIME_LADDER.1)?;
    let q = interface_point(shape);
    let expected = expected_limit(Functional::Time, shape, &q, cond)?;
    let ts: Vec<f64> = lim.extrapolation.raw.iter().map(|p| p.0 * p.0).collect();
    out.csv("time_functional.csv", |w| {
        metadata(cfg, w)?;
        lim.extrapolation.write_report_csv(&mut *w, Some(&ts), expected)?;
        writeln!(
            w,
            "# head_uncertainty={} discretization_uncertainty={} total_uncertainty={}",
            g(lim.head_uncertainty),
            g(lim.discretization_uncertainty),
            g(lim.total_uncertainty())
        )
    })?;
    let limit = lim.limit();
    let budget = lim.total_uncertainty();
    report.note(format!(
        "time_limit = {} richardson={} head={} discretization={}",
        g(limit),
        g(lim.extrapolation.error_estimate),
        g(lim.head_uncertainty),
        g(lim.discretization_uncertainty)
    ));
    if let Ok(h) = extract_mean_curvature(Functional::Time, limit, shape.dim(), cond) {
        report.note(format!("extracted_mean_curvature = {}", g(h)));
    }
    report.check(
        "time-limit",
        limit_check(limit, expected, cfg.tolerance, budget + NULL_TOL),
        format!("limit={} expected={} abs_err={} tolerance={}", g(limit), g(expected), g((limit - expected).abs()), g(cfg.tolerance)),
    );
    if expected != 0.0 {
        report.check(
            "time-limit-uncertainty",
            budget < cfg.tolerance * expected.abs(),
            format!("total_uncertainty={} allowed={}", g(budget), g(cfg.tolerance * expected.abs())),
        );
    }
    if let Shape::Ball { .. } = shape {
        // the lambda limit from the Bessel oracle against time limit * Gamma(5/2)
        let mut none = Vec::new();
        let oracle = RunConfig { solver: Solver::Oracle, lambdas: crate::config::parse_ladder("1e2:1e6:10x").unwrap(), ..cfg.clone() };
        let u = lambda_sequence(&oracle, shape, cond, &mut none)?;
        let ex = extrapolate_lambda_functional(&lambda_functional(&u, cond)?)?;
        let gamma = gamma_fn(2.5)?;
        let diff = (limit * gamma - ex.limit_estimate).abs();
        let allowed = gamma * budget + ex.error_estimate;
        report.check(
            "theorem-consistency",
            diff <= allowed,
            format!("time_limit*gamma(5/2)={} lambda_limit={} diff={} budget={}", g(limit * gamma), g(ex.limit_estimate), g(diff), g(allowed)),
        );
    }
    let r = maximum_principle_trace(trace);
    report.check("trace-in-unit-interval", r.passed(), r.to_string());
    Ok(report)
}

fn ellipse_scan(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let (shape, cond) = (&cfg.shape, &cfg.cond);
    let (a, b) = match *shape {
        Shape::Ellipse2D { a, b } => (a, b),
        _ => unreachable!("shape checked by the config"),
    };
    let mut report = Report::default();
    let mut points = shape.interface_samples(cfg.interface_samples)?;
    let mut index_of = |p: [f64; 2]| match points.iter().position(|q| (q[0] - p[0]).abs() + (q[1] - p[1]).abs() < 1e-9) {
        Some(i) => i,
        None => {
            points.push(p.to_vec());
            points.len() - 1
        }
    };
    let tip = index_of([a, 0.0]);
    let flank = index_of([0.0, b]);
    let opts = GridOptions { finest_factor: cfg.finest_factor.unwrap_or(ELLIPSE_FINEST_FACTOR), ..GridOptions::default() };
    let mut values = vec![Vec::new(); points.len()];
    let mut fields = Vec::new();
    for &l in &cfg.lambdas {
        let grid = ConfocalGrid::for_lambda(shape, cond, l, cfg.n_theta, &opts)?;
        let f = solve_confocal(shape, cond, l, &grid)?;
        for (p, v) in points.iter().zip(values.iter_mut()) {
            v.push((l, f.value_at(p)?));
        }
        report.note(format!("lambda={} unknowns={}", g(l), f.values().len()));
        fields.push(f);
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (p, u) in points.iter().zip(&values) {
        let ex = extrapolate_lambda_functional(&lambda_functional(u, cond)?)?;
        let kappa = shape.mean_curvature(p)?;
        let extracted = extract_mean_curvature(Functional::Lambda, ex.limit_estimate, 2, cond)?;
        let rel = (extracted / kappa - 1.0).abs();
        worst = worst.max(rel);
        rows.push((p.clone(), u.clone(), ex, kappa, extracted, rel));
    }
    out.csv("ellipse_scan.csv", |w| {
        metadata(cfg, w)?;
        let lam: Vec<String> = cfg.lambdas.iter().map(|l| format!("u_lambda_{}", g(*l))).collect();
        writeln!(w, "x,y,{},limit,error_estimate,curvature,extracted_curvature,rel_err", lam.join(","))?;
        for (p, u, ex, kappa, extracted, rel) in &rows {
            let us: Vec<String> = u.iter().map(|v| g(v.1)).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                g(p[0]),
                g(p[1]),
                us.join(","),
                g(ex.limit_estimate),
                g(ex.error_estimate),
                g(*kappa),
                g(*extracted),
                g(*rel)
            )?;
        }
        Ok(())
    })?;
    let ratio = rows[tip].4 / rows[flank].4;
    let expected = (a / b).powi(3);
    report.check(
        "tip-flank-ratio",
        ((ratio / expected) - 1.0).abs() <= cfg.tolerance,
        format!("ratio={} expected={} tolerance={}", g(ratio), g(expected), g(cfg.tolerance)),
    );
    report.check(
        "pointwise-curvature",
        worst <= cfg.tolerance,
        format!("max_rel_err={} samples={} tolerance={}", g(worst), rows.len(), g(cfg.tolerance)),
    );
    range_check(&mut report, "confocal", &fields);
    Ok(report)
}

fn barrier_audit(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let (shape, cond) = (&cfg.shape, &cfg.cond);
    let mut report = Report::default();
    let k = match cfg.k {
        Some(k) => k,
        None => calibrate_k_with(shape, cond, default_half_width(shape), cfg.k_headroom)?,
    };
    report.note(format!("K = {} tube_half_width = {}", g(k), g(default_half_width(shape))));
    let tg = time_grid(cfg)?;
    let mut snaps = Vec::new();
    let mut t = tg.t0();
    while t <= tg.t_max() * (1.0 + 1e-12) {
        snaps.push(t);
        t *= 10.0;
    }
    let run = parabolic_run(cfg, &tg, &snaps)?;
    for w in &run.warnings {
        report.note(format!("warning {w}"));
    }
    let mut fields = Vec::new();
    for &l in &cfg.lambdas {
        fields.push(match *shape {
            Shape::Ball { radius, .. } => {
                let grid = RadialGrid::for_lambda(radius, cond, l, &GridOptions::default())?;
                solve_radial_fd_with_estimate(shape, cond, l, &grid)?
            }
            _ => {
                let grid = PlanarGrid::for_lambda(cond, l, &GridOptions::default())?;
                solve_planar_fd_with_estimate(shape, cond, l, &grid)?
            }
        });
    }
    let mut rows: Vec<BarrierReport> = Vec::new();
    let parabolic = barrier_check_parabolic(&run.traces, &run.snapshots, shape, cond, k)?;
    report.check("lemma4.1", parabolic.passed(), parabolic.to_string());
    rows.push(parabolic);
    for f in &fields {
        let r = barrier_check_elliptic(f, shape, cond, k)?;
        report.check("lemma5.1", r.passed(), r.to_string());
        rows.push(r);
    }
    if k > 0.0 {
        // the bounds must be active: without K they fail
        let p0 = barrier_check_parabolic(&run.traces, &run.snapshots, shape, cond, 0.0)?;
        report.check("lemma4.1-active", !p0.passed(), p0.to_string());
        rows.push(p0);
        let e0 = barrier_check_elliptic(fields.last().expect("ladder has 3 entries"), shape, cond, 0.0)?;
        report.check("lemma5.1-active", !e0.passed(), e0.to_string());
        rows.push(e0);
    }
    out.csv("barrier.csv", |w| {
        metadata(cfg, w)?;
        writeln!(w, "{BARRIER_CSV_HEADER}")?;
        for r in &rows {
            r.write_csv_row(&mut *w)?;
        }
        Ok(())
    })?;
    let mut all = run.snapshots.clone();
    all.extend(fields);
    range_check(&mut report, "solution", &all);
    let r = maximum_principle_trace(run.trace());
    report.check("trace-in-unit-interval", r.passed(), r.to_string());
    Ok(report)
}

fn karamata(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let measure = cfg.measure.expect("required by the config");
    let mut report = Report::default();
    let (m, default_alpha) = match measure {
        Measure::SqrtT | Measure::T => {
            let times = TimeGrid::geometric(1e-4, 1.0, cfg.time_ratio)?.times().to_vec();
            if measure == Measure::SqrtT {
                let l = times.iter().map(|t| 2.0 / 3.0 * t.powf(1.5)).collect();
                (MeasureTrace::new(times, l)?, 1.5)
            } else {
                (MeasureTrace::new(times.clone(), times)?, 1.0)
            }
        }
        Measure::Ell => {
            let k = match cfg.k {
                Some(k) => k,
                None => calibrate_k_with(&cfg.shape, &cfg.cond, default_half_width(&cfg.shape), cfg.k_headroom)?,
            };
            report.note(format!("K = {}", g(k)));
            let tg = time_grid(cfg)?;
            let run = parabolic_run(cfg, &tg, &[])?;
            (MeasureTrace::from_trace(run.trace(), &cfg.cond, k)?, 1.5)
        }
    };
    let alpha = cfg.alpha.unwrap_or(default_alpha);
    let rep = karamata_check(&m, alpha)?;
    out.csv("karamata.csv", |w| {
        writeln!(w, "# measure={measure:?} alpha={}", g(alpha))?;
        writeln!(w, "sequence,parameter,value")?;
        for (l, v) in &rep.transform_sequence {
            writeln!(w, "transform,{},{}", g(*l), g(*v))?;
        }
        for (t, v) in &rep.small_time_sequence {
            writeln!(w, "small_time,{},{}", g(*t), g(*v))?;
        }
        writeln!(
            w,
            "# ratio={} expected={} error_estimate={}",
            g(rep.ratio),
            g(rep.expected_ratio),
            g(rep.ratio_error_estimate)
        )
    })?;
    report.note(format!(
        "transform_limit = {} small_time_limit = {}",
        g(rep.transform_limit.limit_estimate),
        g(rep.small_time_limit.limit_estimate)
    ));
    report.check(
        "karamata-ratio",
        rep.relative_deviation() <= cfg.tolerance,
        format!("ratio={} gamma(alpha+1)={} rel_dev={} tolerance={}", g(rep.ratio), g(rep.expected_ratio), g(rep.relative_deviation()), g(cfg.tolerance)),
    );
    Ok(report)
}

/// Runs verify-elliptic over every (dim, sigma_minus) pair, each in its own
/// subdirectory.
fn sweep(cfg: &RunConfig, out: &Outputs) -> Result<Report, RunError> {
    let mut jobs = Vec::new();
    for &dim in &cfg.sweep_dims {
        for &sm in &cfg.sweep_sigma_minus {
            let mut sub = cfg.clone();
            sub.mode = Mode::VerifyElliptic;
            sub.shape = match cfg.shape {
                Shape::Ball { radius, .. } => Shape::ball(dim, radius)?,
                _ => Shape::half_space(dim)?,
            };
            sub.cond = Conductivity::new(cfg.cond.sigma_plus(), sm)?;
            for (k, v) in sub.echo.iter_mut() {
                match k.as_str() {
                    "mode" => *v = "verify-elliptic".into(),
                    "dim" => *v = dim.to_string(),
                    "sigma-minus" => *v = sm.to_string(),
                    _ => {}
                }
            }
            sub.out = out.dir().join(format!("dim{dim}_sigma-minus{}", g(sm)));
            jobs.push(sub);
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Report, RunError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..cfg.threads.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let r = Outputs::create(&job.out).map_err(RunError::from).and_then(|o| {
                    let rep = verify_elliptic(job, &o)?;
                    o.append_summary(job, &rep)?;
                    Ok(rep)
                });
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut report = Report::default();
    for (job, r) in jobs.iter().zip(results.into_inner().unwrap()) {
        let name = job.out.file_name().unwrap().to_string_lossy().into_owned();
        match r.expect("every job ran") {
            Ok(rep) => {
                let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                report.check(
                    format!("run-{name}"),
                    rep.passed(),
                    if failed.is_empty() { "all checks passed".to_string() } else { format!("failed: {}", failed.join(",")) },
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
