//! Time-domain solvers for `u_t = div(sigma grad u)`, `u(., 0) = chi_Omega`,
//! built on the same finite-volume systems as the elliptic solvers:
//! `M u' + A u = g`. A few fully implicit startup steps damp the rough
//! initial datum, then Crank-Nicolson runs on geometric substeps.

use std::io::{self, Write};

use crate::closedforms::Conductivity;
use crate::csvio::format_g17;
use crate::elliptic::{
    cartesian_system, check_fitted, confocal_system, planar_system, radial_system, CartesianGrid2D,
    ConfocalGrid, Field, FieldParameter, FvSystem, Mesh, PlanarGrid, RadialGrid,
    DEFAULT_SOLVER_TOL, MAX_CG_ITER,
};
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::linalg::pcg;

/// Output times `t_k = t0 * ratio^k` (the last one clipped to `t_max`), with
/// `substeps` time steps between consecutive outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    ratio: f64,
    substeps: usize,
    startup_steps: usize,
}

impl TimeGrid {
    pub fn geometric(t0: f64, t_max: f64, ratio: f64) -> Result<Self> {
        if !(t0 > 0.0 && t_max > t0 && ratio > 1.0 && t_max.is_finite()) {
            return domain(format!("invalid time grid t0={t0}, t_max={t_max}, ratio={ratio}"));
        }
        let mut times = vec![t0];
        loop {
            let next = times.last().unwrap() * ratio;
            if next >= t_max * (1.0 - 1e-12) {
                break;
            }
            times.push(next);
        }
        times.push(t_max);
        Ok(TimeGrid { times, ratio, substeps: 8, startup_steps: 4 })
    }

    /// `t0 = 1e-4 L^2 / max sigma` to `t_max = L^2 / max sigma`, ratio 1.15,
    /// with `L` the length scale of the shape.
    pub fn for_shape(shape: &Shape, cond: &Conductivity) -> Result<Self> {
        let l = shape.length_scale();
        let t_max = l * l / cond.max();
        Self::geometric(1e-4 * t_max, t_max, 1.15)
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    pub fn with_startup_steps(mut self, steps: usize) -> Self {
        self.startup_steps = steps.max(1);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn startup_steps(&self) -> usize {
        self.startup_steps
    }

    /// Same outputs with every time step halved.
    pub fn refined(&self) -> Self {
        TimeGrid { substeps: 2 * self.substeps, startup_steps: 2 * self.startup_steps, ..self.clone() }
    }

    /// Index of the output time closest to `t` (in log scale).
    pub fn nearest_index(&self, t: f64) -> usize {
        let d = |s: f64| (s / t).ln().abs();
        (0..self.times.len()).min_by(|&i, &j| d(self.times[i]).total_cmp(&d(self.times[j]))).unwrap()
    }

    fn schedule(&self) -> Vec<Step> {
        let mut steps = Vec::new();
        let q = self.ratio.powf(1.0 / self.substeps as f64);
        // startup: uniform implicit steps on [0, t0/10]
        let t_start = 0.1 * self.t0();
        for _ in 0..self.startup_steps {
            steps.push(Step { dt: t_start / self.startup_steps as f64, implicit: true, output: None });
        }
        let mut push_geometric = |from: f64, to: f64, output: Option<usize>| {
            let n = ((to / from).ln() / q.ln()).ceil().max(1.0) as usize;
            let f = (to / from).powf(1.0 / n as f64);
            let mut t = from;
            for s in 0..n {
                let next = if s + 1 == n { to } else { t * f };
                steps.push(Step { dt: next - t, implicit: false, output: if s + 1 == n { output } else { None } });
                t = next;
            }
        };
        push_geometric(t_start, self.t0(), Some(0));
        for k in 1..self.times.len() {
            push_geometric(self.times[k - 1], self.times[k], Some(k));
        }
        steps
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    dt: f64,
    implicit: bool,
    output: Option<usize>,
}

/// Values `u(x0, t_k)` at a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    point: Vec<f64>,
    times: Vec<f64>,
    values: Vec<f64>,
    errors: Option<Vec<f64>>,
    cond: Conductivity,
    shape: Option<Shape>,
    mesh: String,
}

impl TimeTrace {
    /// Trace from given samples (e.g. a synthetic model). Times must be
    /// positive and strictly increasing.
    pub fn from_samples(point: Vec<f64>, times: Vec<f64>, values: Vec<f64>, cond: Conductivity) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return domain("a trace needs at least two (t, u) samples of equal length");
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("trace times must be positive and strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("trace values must be finite");
        }
        Ok(TimeTrace { point, times, values, errors: None, cond, shape: None, mesh: "synthetic".into() })
    }

    /// Per-time discretization error estimates (same length as `times`).
    pub fn with_errors(mut self, errors: Vec<f64>) -> Result<Self> {
        if errors.len() != self.times.len() {
            return domain("one error estimate per trace time is required");
        }
        self.errors = Some(errors);
        Ok(self)
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn errors(&self) -> Option<&[f64]> {
        self.errors.as_deref()
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.cond
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    pub fn mesh_descriptor(&self) -> &str {
        &self.mesh
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let point: Vec<String> = self.point.iter().map(|&x| format_g17(x)).collect();
        writeln!(
            w,
            "# point={} sigma_plus={} sigma_minus={}",
            point.join(";"),
            format_g17(self.cond.sigma_plus()),
            format_g17(self.cond.sigma_minus())
        )?;
        writeln!(w, "t,u")?;
        for (t, u) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", format_g17(*t), format_g17(*u))?;
        }
        Ok(())
    }
}

/// Everything a parabolic solve produces.
#[derive(Debug, Clone)]
pub struct ParabolicRun {
    pub traces: Vec<TimeTrace>,
    /// Full solutions at the requested snapshot times.
    pub snapshots: Vec<Field>,
    /// Discrete heat content `sum M u` at every output time.
    pub heat_content: Vec<f64>,
    pub initial_heat: f64,
    pub warnings: Vec<String>,
    pub max_cg_iterations: usize,
}

impl ParabolicRun {
    pub fn trace(&self) -> &TimeTrace {
        &self.traces[0]
    }
}

struct Marched {
    outputs: Vec<Vec<f64>>,
    snapshots: Vec<(usize, Vec<f64>)>,
    heat: Vec<f64>,
    initial_heat: f64,
    max_iter: usize,
}

/// Integrates `M u' + A u = g` from `u(0) = M_in / M`, recording the full
/// solution at `keep` output indices and `observe` at every output.
fn march(sys: &FvSystem, tg: &TimeGrid, keep: &[usize], observe: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<Marched> {
    let n = sys.n();
    let mut u: Vec<f64> = (0..n).map(|i| sys.inside_mass[i] / sys.mass[i]).collect();
    let heat = |u: &[f64]| u.iter().zip(&sys.mass).map(|(a, m)| a * m).sum::<f64>();
    let initial_heat = heat(&u);
    let precond = sys.preconditioner();
    let mut au = vec![0.0; n];
    let mut out = Marched { outputs: Vec::new(), snapshots: Vec::new(), heat: Vec::new(), initial_heat, max_iter: 0 };
    for step in tg.schedule() {
        let theta = if step.implicit { 1.0 } else { 0.5 };
        let diag: Vec<f64> = sys.mass.clone();
        let a = sys.stiffness.scaled_plus_diagonal(theta * step.dt, &diag);
        sys.stiffness.mul_vec(&u, &mut au);
        let b: Vec<f64> = (0..n)
            .map(|i| sys.mass[i] * u[i] - (1.0 - theta) * step.dt * au[i] + step.dt * sys.load[i])
            .collect();
        let stats = pcg(&a, &b, &mut u, &precond, DEFAULT_SOLVER_TOL, MAX_CG_ITER)?;
        out.max_iter = out.max_iter.max(stats.iterations);
        if let Some(k) = step.output {
            let full = sys.embed(&u);
            out.outputs.push(observe(&full));
            out.heat.push(heat(&u));
            if keep.contains(&k) {
                out.snapshots.push((k, full));
            }
        }
    }
    Ok(out)
}

fn finish(
    sys: &FvSystem,
    mesh: Mesh,
    shape: &Shape,
    cond: &Conductivity,
    tg: &TimeGrid,
    points: &[Vec<f64>],
    snapshot_times: &[f64],
    observe: &dyn Fn(&[f64]) -> Vec<f64>,
    mut warnings: Vec<String>,
) -> Result<ParabolicRun> {
    let keep: Vec<usize> = snapshot_times.iter().map(|&t| tg.nearest_index(t)).collect();
    let m = march(sys, tg, &keep, observe)?;
    let descriptor = mesh.descriptor();
    let mut traces = Vec::with_capacity(points.len());
    for (p, point) in points.iter().enumerate() {
        let values: Vec<f64> = m.outputs.iter().map(|o| o[p]).collect();
        traces.push(TimeTrace {
            point: point.clone(),
            times: tg.times().to_vec(),
            values,
            errors: None,
            cond: *cond,
            shape: Some(*shape),
            mesh: descriptor.clone(),
        });
    }
    let lo = traces.iter().flat_map(|t| t.values.iter().copied()).fold(f64::INFINITY, f64::min);
    let hi = traces.iter().flat_map(|t| t.values.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0 && hi < 1.0) {
        warnings.push(format!("trace values leave (0,1): range [{lo:e}, {hi:e}]"));
    }
    let scale = m.initial_heat.abs().max(f64::MIN_POSITIVE);
    if m.heat.windows(2).any(|w| w[1] > w[0] + 1e-9 * scale) {
        warnings.push("heat content increased between outputs".into());
    }
    if let Some(&last) = m.heat.last() {
        let loss = (m.initial_heat - last) / scale;
        if loss > 1e-6 {
            warnings.push(format!("outer boundary absorbed a fraction {loss:.2e} of the heat"));
        }
    }
    let snapshots = m
        .snapshots
        .into_iter()
        .map(|(k, full)| Field::from_values(mesh.clone(), full, *shape, *cond, FieldParameter::Time(tg.times()[k])))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParabolicRun {
        traces,
        snapshots,
        heat_content: m.heat,
        initial_heat: m.initial_heat,
        warnings,
        max_cg_iterations: m.max_iter,
    })
}

fn resolution_warning(finest: f64, cond: &Conductivity, tg: &TimeGrid) -> Vec<String> {
    let layer = (cond.min() * tg.t0()).sqrt();
    if finest > 0.25 * layer {
        vec![format!(
            "interface spacing {finest:e} exceeds 0.25 sqrt(min sigma t0) = {:e}; early times are under-resolved",
            0.25 * layer
        )]
    } else {
        Vec::new()
    }
}

/// Default interface spacing in units of `sqrt(min sigma t0)`.
pub const DEFAULT_TIME_FINEST_FACTOR: f64 = 0.025;

/// Largest distance from the interface to any point at which heat still
/// matters by `t_max`, in units of `sqrt(sigma_minus t_max)`.
pub const TIME_MARGIN_FACTOR: f64 = 8.0;

impl RadialGrid {
    /// Graded grid for a parabolic run: interface spacing
    /// `finest_factor * sqrt(min sigma t0)`, outer boundary
    /// `TIME_MARGIN_FACTOR` diffusion lengths beyond the ball at `t_max`.
    pub fn for_time(radius: f64, cond: &Conductivity, tg: &TimeGrid, finest_factor: f64) -> Result<Self> {
        if !(finest_factor > 0.0) {
            return domain("finest_factor must be positive");
        }
        let finest = finest_factor * (cond.min() * tg.t0()).sqrt();
        let r_max = radius + TIME_MARGIN_FACTOR * (cond.sigma_minus() * tg.t_max()).sqrt();
        Self::graded(radius, r_max, finest, 1.03, (0.05 * radius).max(finest))
    }
}

impl PlanarGrid {
    pub fn for_time(cond: &Conductivity, tg: &TimeGrid, finest_factor: f64) -> Result<Self> {
        if !(finest_factor > 0.0) {
            return domain("finest_factor must be positive");
        }
        let finest = finest_factor * (cond.min() * tg.t0()).sqrt();
        let l = |s: f64| TIME_MARGIN_FACTOR * (s * tg.t_max()).sqrt();
        let hmax = (0.05 * l(cond.min())).max(finest);
        Self::graded(l(cond.sigma_minus()), l(cond.sigma_plus()), finest, 1.03, hmax)
    }
}

impl CartesianGrid2D {
    /// Box holding the shape plus `margin_factor` exterior diffusion lengths
    /// at `t_max`, with `nx` cells along x.
    pub fn for_time(shape: &Shape, cond: &Conductivity, tg: &TimeGrid, nx: usize, margin_factor: f64) -> Result<Self> {
        let (ex, ey) = match *shape {
            Shape::Ball { dim: 2, radius } => (radius, radius),
            Shape::Ellipse2D { a, b } => (a, b),
            _ => return domain(format!("Cartesian grids support 2D balls and ellipses, not {}", shape.label())),
        };
        let margin = margin_factor * (cond.sigma_minus() * tg.t_max()).sqrt();
        Self::new(shape, cond, ex + margin, ey + margin, nx)
    }
}

impl ConfocalGrid {
    /// Confocal grid for a parabolic run; `n_theta` angles, physical interface
    /// spacing at most `finest_factor * sqrt(min sigma t0)`.
    pub fn for_time(shape: &Shape, cond: &Conductivity, tg: &TimeGrid, n_theta: usize, finest_factor: f64) -> Result<Self> {
        let (a, b) = match *shape {
            Shape::Ellipse2D { a, b } => (a, b),
            _ => return domain("confocal grids need an ellipse"),
        };
        if !(finest_factor > 0.0 && a > b) {
            return domain("confocal grids need a > b and a positive finest_factor");
        }
        let c = (a * a - b * b).sqrt();
        let h_mu = finest_factor * (cond.min() * tg.t0()).sqrt() / b;
        let margin = TIME_MARGIN_FACTOR * (cond.sigma_minus() * tg.t_max()).sqrt();
        let mu_i = (b / a).atanh();
        Self::new(shape, h_mu, 1.03, (0.05 * mu_i).max(h_mu), ((a + margin) / c).acosh(), n_theta)
    }
}

/// Radial solve on a ball; the first trace is `u(R, t)`. Snapshots are taken
/// at the output times nearest to `snapshot_times`.
pub fn solve_radial_parabolic(
    ball: &Shape,
    cond: &Conductivity,
    grid: &RadialGrid,
    tg: &TimeGrid,
    snapshot_times: &[f64],
) -> Result<ParabolicRun> {
    let (dim, radius) = match *ball {
        Shape::Ball { dim, radius } => (dim, radius),
        _ => return domain("radial solver needs a ball"),
    };
    check_fitted(grid, radius)?;
    let sys = radial_system(dim, grid, cond);
    let i = grid.interface_index();
    let mut point = vec![0.0; dim];
    point[0] = radius;
    let warnings = resolution_warning(grid.finest(), cond, tg);
    let mesh = Mesh::Radial { dim, grid: grid.clone() };
    finish(&sys, mesh, ball, cond, tg, &[point], snapshot_times, &|u| vec![u[i]], warnings)
}

/// Radial solve repeated with the mesh bisected and the time steps halved;
/// returns the fine run with per-time trace errors and per-snapshot error
/// estimates equal to the change between the two.
pub fn solve_radial_parabolic_with_estimate(
    ball: &Shape,
    cond: &Conductivity,
    grid: &RadialGrid,
    tg: &TimeGrid,
    snapshot_times: &[f64],
) -> Result<ParabolicRun> {
    let coarse = solve_radial_parabolic(ball, cond, grid, tg, snapshot_times)?;
    let mut fine = solve_radial_parabolic(ball, cond, &grid.refined(), &tg.refined(), snapshot_times)?;
    let errors: Vec<f64> =
        coarse.trace().values.iter().zip(&fine.trace().values).map(|(a, b)| (a - b).abs()).collect();
    fine.traces[0] = fine.traces[0].clone().with_errors(errors)?;
    for (c, f) in coarse.snapshots.iter().zip(fine.snapshots.iter_mut()) {
        let d = c.values().iter().enumerate().map(|(i, v)| (v - f.values()[2 * i]).abs()).fold(0.0, f64::max);
        *f = f.clone().with_error_estimate(d);
    }
    Ok(fine)
}

/// Half-space solve; the trace is taken on the interface `x_N = 0`.
pub fn solve_planar_parabolic(shape: &Shape, cond: &Conductivity, grid: &PlanarGrid, tg: &TimeGrid) -> Result<ParabolicRun> {
    let dim = match *shape {
        Shape::HalfSpace { dim } => dim,
        _ => return domain("planar solver needs a half-space"),
    };
    let sys = planar_system(grid, cond);
    let i = grid.interface_index();
    let warnings = resolution_warning(grid.finest(), cond, tg);
    let mesh = Mesh::Planar { dim, grid: grid.clone() };
    finish(&sys, mesh, shape, cond, tg, &[vec![0.0; dim]], &[], &|u| vec![u[i]], warnings)
}

/// Half-space solve repeated with the mesh bisected and the time steps
/// halved; the fine trace carries the change as its per-time errors.
pub fn solve_planar_parabolic_with_estimate(
    shape: &Shape,
    cond: &Conductivity,
    grid: &PlanarGrid,
    tg: &TimeGrid,
) -> Result<ParabolicRun> {
    let coarse = solve_planar_parabolic(shape, cond, grid, tg)?;
    let mut fine = solve_planar_parabolic(shape, cond, &grid.refined(), &tg.refined())?;
    let errors: Vec<f64> =
        coarse.trace().values.iter().zip(&fine.trace().values).map(|(a, b)| (a - b).abs()).collect();
    fine.traces[0] = fine.traces[0].clone().with_errors(errors)?;
    Ok(fine)
}

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() || points.iter().any(|p| p.len() != 2) {
        return domain("at least one two-dimensional trace point is required");
    }
    Ok(())
}

/// Cartesian solve for a 2D ball or ellipse; one trace per point, by bilinear
/// interpolation of the cell values.
pub fn solve_cartesian_parabolic_2d(
    shape: &Shape,
    cond: &Conductivity,
    grid: &CartesianGrid2D,
    tg: &TimeGrid,
    points: &[Vec<f64>],
    snapshot_times: &[f64],
) -> Result<ParabolicRun> {
    check_points(points)?;
    let mut warnings = resolution_warning(grid.h(), cond, tg);
    let needed = 6.0 * (cond.sigma_minus() * tg.t_max()).sqrt();
    if grid.margin(shape)? < needed {
        warnings.push(format!("box margin below 6 sqrt(sigma_minus t_max) = {needed:e}"));
    }
    let sys = cartesian_system(grid);
    let g = grid.clone();
    let pts = points.to_vec();
    let observe = move |u: &[f64]| pts.iter().map(|p| g.interpolate(u, p[0], p[1])).collect();
    finish(&sys, Mesh::Cartesian(grid.clone()), shape, cond, tg, points, snapshot_times, &observe, warnings)
}

/// Interface-fitted solve for an ellipse in confocal coordinates.
pub fn solve_confocal_parabolic(
    shape: &Shape,
    cond: &Conductivity,
    grid: &ConfocalGrid,
    tg: &TimeGrid,
    points: &[Vec<f64>],
    snapshot_times: &[f64],
) -> Result<ParabolicRun> {
    check_points(points)?;
    if !matches!(shape, Shape::Ellipse2D { .. }) {
        return domain("confocal solver needs an ellipse");
    }
    let sys = confocal_system(grid, cond);
    let warnings = resolution_warning(grid.finest_physical(), cond, tg);
    let g = grid.clone();
    let pts = points.to_vec();
    let observe = move |u: &[f64]| pts.iter().map(|p| g.interpolate(u, p[0], p[1])).collect();
    finish(&sys, Mesh::Confocal(grid.clone()), shape, cond, tg, points, snapshot_times, &observe, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_clips_last_time() {
        let tg = TimeGrid::geometric(1e-3, 1.0, 2.0).unwrap();
        assert_eq!(tg.t0(), 1e-3);
        assert_eq!(tg.t_max(), 1.0);
        assert!(tg.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(tg.times().len(), 11);
        assert_eq!(tg.nearest_index(0.0041), 2);
    }

    #[test]
    fn schedule_hits_every_output() {
        let tg = TimeGrid::geometric(1e-2, 1.0, 1.15).unwrap();
        let steps = tg.schedule();
        assert_eq!(steps.iter().filter(|s| s.implicit).count(), 4);
        let mut t = 0.0;
        let mut k = 0;
        for s in &steps {
            assert!(s.dt > 0.0);
            t += s.dt;
            if let Some(o) = s.output {
                assert_eq!(o, k);
                assert!((t - tg.times()[k]).abs() < 1e-12 * tg.times()[k]);
                k += 1;
            }
        }
        assert_eq!(k, tg.times().len());
    }

    #[test]
    fn trace_rejects_unsorted_times() {
        let c = Conductivity::new(1.0, 1.0).unwrap();
        assert!(TimeTrace::from_samples(vec![0.0], vec![0.1, 0.1], vec![0.5, 0.5], c).is_err());
        assert!(TimeTrace::from_samples(vec![0.0], vec![0.0, 0.1], vec![0.5, 0.5], c).is_err());
    }
}
