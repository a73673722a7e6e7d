//! Interface-fitted one-dimensional grids and the vertex-centred finite-volume
//! discretization for balls (radial symmetry) and half-spaces (dependence on
//! `x_N` only).

use crate::closedforms::Conductivity;
use crate::error::{domain, Error, Result};
use crate::geometry::Shape;
use crate::linalg::CsrMatrix;

use super::{Field, FieldParameter, FvSystem, Mesh, DEFAULT_SOLVER_TOL};

/// Grid construction parameters. Lengths are in units of the boundary-layer
/// width `1/k`, `k = sqrt(lambda / sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Interface spacing times `sqrt(lambda / min sigma)`.
    pub finest_factor: f64,
    /// Geometric growth of the spacing away from the interface.
    pub stretch: f64,
    /// Distance to the Dirichlet boundary times `sqrt(lambda / sigma)` on
    /// that side.
    pub margin_factor: f64,
    /// Largest spacing, as a fraction of the length scale of the shape.
    pub max_spacing_fraction: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { finest_factor: 0.01, stretch: 1.03, margin_factor: 12.0, max_spacing_fraction: 0.05 }
    }
}

impl GridOptions {
    fn validate(&self) -> Result<()> {
        if !(self.finest_factor > 0.0 && self.stretch >= 1.0 && self.margin_factor > 0.0 && self.max_spacing_fraction > 0.0) {
            return domain(format!("invalid grid options {self:?}"));
        }
        Ok(())
    }
}

/// Nodes from `start` towards `end` (excluding `start`, ending exactly at
/// `end`), spacing `h0` growing by `stretch` up to `hmax`. A short remainder
/// is shared with the previous interval.
pub(crate) fn graded_side(start: f64, end: f64, h0: f64, stretch: f64, hmax: f64) -> Vec<f64> {
    let dir = if end > start { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    let mut x = start;
    let mut h = h0.min(hmax);
    let mut last = h;
    while (end - x).abs() > 1.5 * h {
        x += dir * h;
        out.push(x);
        last = h;
        h = (h * stretch).min(hmax);
    }
    if (end - x).abs() < last && out.len() >= 2 {
        out.pop();
        let prev = *out.last().unwrap();
        out.push(0.5 * (prev + end));
    }
    out.push(end);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    interface_index: usize,
    stretch: f64,
}

impl RadialGrid {
    /// Validates explicit nodes: `r_0 = 0`, strictly increasing, and
    /// `nodes[interface_index]` is the interface radius.
    pub fn from_nodes(nodes: Vec<f64>, interface_index: usize) -> Result<Self> {
        if nodes.len() < 3 || nodes[0] != 0.0 {
            return domain("radial grid needs at least three nodes starting at r = 0");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("radial grid nodes must be strictly increasing");
        }
        if interface_index == 0 || interface_index + 1 >= nodes.len() {
            return domain("the interface node must be interior");
        }
        Ok(RadialGrid { nodes, interface_index, stretch: 1.0 })
    }

    /// Graded grid on `[0, r_max]` with a node at `radius`.
    pub fn graded(radius: f64, r_max: f64, finest: f64, stretch: f64, max_spacing: f64) -> Result<Self> {
        if !(radius > 0.0 && r_max > radius && finest > 0.0 && stretch >= 1.0 && max_spacing >= finest) {
            return domain(format!(
                "invalid radial grid parameters R={radius}, r_max={r_max}, finest={finest}, stretch={stretch}"
            ));
        }
        let mut inner = graded_side(radius, 0.0, finest, stretch, max_spacing);
        inner.reverse();
        let interface_index = inner.len();
        let mut nodes = inner;
        nodes.push(radius);
        nodes.extend(graded_side(radius, r_max, finest, stretch, max_spacing));
        Ok(RadialGrid { nodes, interface_index, stretch })
    }

    /// Default grid for a ball at parameter `lambda`.
    pub fn for_lambda(radius: f64, cond: &Conductivity, lambda: f64, opts: &GridOptions) -> Result<Self> {
        opts.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive, got {lambda}"));
        }
        let finest = opts.finest_factor / (lambda / cond.min()).sqrt();
        let r_max = radius + opts.margin_factor / (lambda / cond.sigma_minus()).sqrt();
        let hmax = (opts.max_spacing_fraction * radius).max(finest);
        Self::graded(radius, r_max, finest, opts.stretch, hmax)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interface_index(&self) -> usize {
        self.interface_index
    }

    pub fn radius(&self) -> f64 {
        self.nodes[self.interface_index]
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Smallest spacing adjacent to the interface.
    pub fn finest(&self) -> f64 {
        let i = self.interface_index;
        (self.nodes[i] - self.nodes[i - 1]).min(self.nodes[i + 1] - self.nodes[i])
    }

    /// The grid with every interval bisected.
    pub fn refined(&self) -> Self {
        RadialGrid {
            nodes: bisect(&self.nodes),
            interface_index: 2 * self.interface_index,
            stretch: self.stretch.sqrt(),
        }
    }
}

fn bisect(nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * nodes.len() - 1);
    for w in nodes.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*nodes.last().unwrap());
    out
}

/// Grid in the normal coordinate `s = x_N` for a half-space; `s > 0` is
/// inside. Dirichlet values: 0 at the outer end, 1 at the inner end.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarGrid {
    nodes: Vec<f64>,
    interface_index: usize,
}

impl PlanarGrid {
    pub fn graded(l_minus: f64, l_plus: f64, finest: f64, stretch: f64, max_spacing: f64) -> Result<Self> {
        if !(l_minus > 0.0 && l_plus > 0.0 && finest > 0.0 && stretch >= 1.0 && max_spacing >= finest) {
            return domain("invalid planar grid parameters");
        }
        let mut nodes = graded_side(0.0, -l_minus, finest, stretch, max_spacing);
        nodes.reverse();
        let interface_index = nodes.len();
        nodes.push(0.0);
        nodes.extend(graded_side(0.0, l_plus, finest, stretch, max_spacing));
        Ok(PlanarGrid { nodes, interface_index })
    }

    pub fn for_lambda(cond: &Conductivity, lambda: f64, opts: &GridOptions) -> Result<Self> {
        opts.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive, got {lambda}"));
        }
        let finest = opts.finest_factor / (lambda / cond.min()).sqrt();
        let l_minus = opts.margin_factor / (lambda / cond.sigma_minus()).sqrt();
        let l_plus = opts.margin_factor / (lambda / cond.sigma_plus()).sqrt();
        let hmax = (l_minus.max(l_plus) * opts.max_spacing_fraction).max(finest);
        Self::graded(l_minus, l_plus, finest, opts.stretch, hmax)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interface_index(&self) -> usize {
        self.interface_index
    }

    pub fn finest(&self) -> f64 {
        let i = self.interface_index;
        (self.nodes[i] - self.nodes[i - 1]).min(self.nodes[i + 1] - self.nodes[i])
    }

    pub fn refined(&self) -> Self {
        PlanarGrid { nodes: bisect(&self.nodes), interface_index: 2 * self.interface_index }
    }
}

#[derive(Clone, Copy)]
enum Weight {
    Radial(usize),
    Planar,
}

impl Weight {
    fn volume(self, a: f64, b: f64) -> f64 {
        match self {
            Weight::Radial(n) => (b.powi(n as i32) - a.powi(n as i32)) / n as f64,
            Weight::Planar => b - a,
        }
    }

    fn area(self, f: f64) -> f64 {
        match self {
            Weight::Radial(n) => f.powi(n as i32 - 1),
            Weight::Planar => 1.0,
        }
    }
}

/// Vertex-centred finite volumes on a 1D chain. Each interval lies in a single
/// phase, so the face conductivity is that phase's value. `left` is `None` for
/// a symmetry end (the origin of a radial grid) or a Dirichlet value; the
/// right end is always Dirichlet.
fn assemble_1d(
    nodes: &[f64],
    interval_inside: &dyn Fn(usize) -> bool,
    weight: Weight,
    cond: &Conductivity,
    left: Option<f64>,
    right: f64,
) -> FvSystem {
    let n_full = nodes.len();
    let first = if left.is_some() { 1 } else { 0 };
    let last = n_full - 1;
    let unknown_to_full: Vec<usize> = (first..last).collect();
    let n = unknown_to_full.len();
    let sigma_of = |i: usize| if interval_inside(i) { cond.sigma_plus() } else { cond.sigma_minus() };
    let trans: Vec<f64> = (0..n_full - 1)
        .map(|i| {
            let f = 0.5 * (nodes[i] + nodes[i + 1]);
            sigma_of(i) * weight.area(f) / (nodes[i + 1] - nodes[i])
        })
        .collect();
    let mut trip = Vec::with_capacity(3 * n);
    let mut mass = vec![0.0; n];
    let mut inside_mass = vec![0.0; n];
    let mut load = vec![0.0; n];
    for (k, &i) in unknown_to_full.iter().enumerate() {
        let lo = if i == 0 { nodes[0] } else { 0.5 * (nodes[i - 1] + nodes[i]) };
        let hi = 0.5 * (nodes[i] + nodes[i + 1]);
        let (vl, vr) = (weight.volume(lo, nodes[i]), weight.volume(nodes[i], hi));
        mass[k] = vl + vr;
        if i > 0 && interval_inside(i - 1) {
            inside_mass[k] += vl;
        }
        if interval_inside(i) {
            inside_mass[k] += vr;
        }
        let mut d = trans[i];
        if i + 1 == last {
            load[k] += trans[i] * right;
        } else {
            trip.push((k, k + 1, -trans[i]));
        }
        if i > 0 {
            d += trans[i - 1];
            if i == first && left.is_some() {
                load[k] += trans[i - 1] * left.unwrap();
            } else {
                trip.push((k, k - 1, -trans[i - 1]));
            }
        }
        trip.push((k, k, d));
    }
    let mut fixed = vec![(last, right)];
    if let Some(g) = left {
        fixed.push((0, g));
    }
    FvSystem {
        stiffness: CsrMatrix::from_triplets(n, trip),
        mass,
        inside_mass,
        load,
        lines: vec![(0..n).collect()],
        full_len: n_full,
        unknown_to_full,
        fixed,
    }
}

pub(crate) fn radial_system(dim: usize, grid: &RadialGrid, cond: &Conductivity) -> FvSystem {
    let iface = grid.interface_index();
    assemble_1d(grid.nodes(), &|i| i < iface, Weight::Radial(dim), cond, None, 0.0)
}

pub(crate) fn planar_system(grid: &PlanarGrid, cond: &Conductivity) -> FvSystem {
    let iface = grid.interface_index();
    assemble_1d(grid.nodes(), &|i| i >= iface, Weight::Planar, cond, Some(0.0), 1.0)
}

fn ball_params(ball: &Shape) -> Result<(usize, f64)> {
    match *ball {
        Shape::Ball { dim, radius } => Ok((dim, radius)),
        _ => domain("radial solver needs a ball"),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        domain(format!("lambda must be positive, got {lambda}"))
    }
}

pub(crate) fn check_fitted(grid: &RadialGrid, radius: f64) -> Result<()> {
    if (grid.radius() - radius).abs() > 1e-14 * radius {
        return domain(format!(
            "grid interface node {} does not match the ball radius {radius}",
            grid.radius()
        ));
    }
    Ok(())
}

/// Radial finite-volume solution of the two-phase Helmholtz problem on a ball.
pub fn solve_radial_fd(ball: &Shape, cond: &Conductivity, lambda: f64, grid: &RadialGrid) -> Result<Field> {
    let (dim, radius) = ball_params(ball)?;
    check_lambda(lambda)?;
    check_fitted(grid, radius)?;
    let sys = radial_system(dim, grid, cond);
    let (values, stats) = sys.solve_helmholtz(lambda, DEFAULT_SOLVER_TOL).map_err(|e| match e {
        Error::Numeric(m) => Error::Numeric(format!("radial solve broke down (grid bug?): {m}")),
        other => other,
    })?;
    Ok(Field::from_values(
        Mesh::Radial { dim, grid: grid.clone() },
        values,
        *ball,
        *cond,
        FieldParameter::Lambda(lambda),
    )?
    .with_solver(stats))
}

/// Solves on `grid` and on its bisection; returns the fine solution with the
/// largest nodal change as its error estimate.
pub fn solve_radial_fd_with_estimate(
    ball: &Shape,
    cond: &Conductivity,
    lambda: f64,
    grid: &RadialGrid,
) -> Result<Field> {
    let coarse = solve_radial_fd(ball, cond, lambda, grid)?;
    let fine = solve_radial_fd(ball, cond, lambda, &grid.refined())?;
    let diff = coarse
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.values()[2 * i]).abs())
        .fold(0.0, f64::max);
    Ok(fine.with_error_estimate(diff))
}

/// Finite-volume solution for a half-space; depends on `x_N` only.
pub fn solve_planar_fd(shape: &Shape, cond: &Conductivity, lambda: f64, grid: &PlanarGrid) -> Result<Field> {
    let dim = match *shape {
        Shape::HalfSpace { dim } => dim,
        _ => return domain("planar solver needs a half-space"),
    };
    check_lambda(lambda)?;
    let sys = planar_system(grid, cond);
    let (values, stats) = sys.solve_helmholtz(lambda, DEFAULT_SOLVER_TOL)?;
    Ok(Field::from_values(
        Mesh::Planar { dim, grid: grid.clone() },
        values,
        *shape,
        *cond,
        FieldParameter::Lambda(lambda),
    )?
    .with_solver(stats))
}

/// Planar counterpart of [`solve_radial_fd_with_estimate`].
pub fn solve_planar_fd_with_estimate(
    shape: &Shape,
    cond: &Conductivity,
    lambda: f64,
    grid: &PlanarGrid,
) -> Result<Field> {
    let coarse = solve_planar_fd(shape, cond, lambda, grid)?;
    let fine = solve_planar_fd(shape, cond, lambda, &grid.refined())?;
    let diff = coarse
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.values()[2 * i]).abs())
        .fold(0.0, f64::max);
    Ok(fine.with_error_estimate(diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_properties() {
        let g = RadialGrid::graded(1.0, 2.0, 1e-3, 1.05, 0.05).unwrap();
        let r = g.nodes();
        assert_eq!(r[0], 0.0);
        assert_eq!(g.radius(), 1.0);
        assert_eq!(*r.last().unwrap(), 2.0);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!((g.finest() - 1e-3).abs() < 1e-15);
        for w in r.windows(3) {
            let ratio = (w[2] - w[1]) / (w[1] - w[0]);
            assert!(ratio < 1.6 && ratio > 1.0 / 1.6, "ratio {ratio}");
        }
        let f = g.refined();
        assert_eq!(f.radius(), 1.0);
        assert_eq!(f.nodes().len(), 2 * r.len() - 1);
        assert!(RadialGrid::from_nodes(vec![0.0, 0.5, 0.4, 1.0], 1).is_err());
        assert!(RadialGrid::graded(1.0, 0.5, 1e-3, 1.05, 0.05).is_err());
    }

    #[test]
    fn conservation_of_constant_mode() {
        // with lambda M on the diagonal and no interface, U = 1 solves the
        // discrete system whenever the outer Dirichlet value is 1
        let cond = Conductivity::new(2.0, 2.0).unwrap();
        let g = RadialGrid::graded(1.0, 3.0, 0.01, 1.1, 0.1).unwrap();
        let sys = radial_system(3, &g, &cond);
        let ones = vec![1.0; sys.n()];
        let mut au = vec![0.0; sys.n()];
        sys.stiffness.mul_vec(&ones, &mut au);
        // row sums vanish except next to the Dirichlet node
        for (k, v) in au.iter().enumerate().take(sys.n() - 1) {
            assert!(v.abs() < 1e-9, "row {k}: {v}");
        }
        let total: f64 = sys.mass.iter().sum::<f64>();
        let f_last = 0.5 * (g.nodes()[g.nodes().len() - 2] + 3.0);
        assert!((total - f_last.powi(3) / 3.0).abs() < 1e-12);
        let inside: f64 = sys.inside_mass.iter().sum();
        assert!((inside - 1.0 / 3.0).abs() < 1e-14);
    }
}
