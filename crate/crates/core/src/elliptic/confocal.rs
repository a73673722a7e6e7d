//! Interface-fitted finite volumes for an ellipse in confocal elliptic
//! coordinates `x = c cosh(mu) cos(theta)`, `y = c sinh(mu) sin(theta)`,
//! `c^2 = a^2 - b^2`. The ellipse is the coordinate line `mu = mu_I` with
//! `tanh(mu_I) = b/a`, and `theta` is its parametric angle. The coordinates
//! are conformal, so the operator becomes
//! `-d_mu(sigma d_mu U) - d_theta(sigma d_theta U) + lambda J (U - chi) = 0`
//! with `J = c^2 (sinh^2 mu + sin^2 theta)`.
//!
//! Nodes sit at `theta_i = (i + 1/2) dtheta` and on a graded `mu` grid with
//! a node on the ellipse. The focal segment `mu = 0` is crossed by coupling
//! `(mu_0, theta)` to its mirror `(mu_0, -theta)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::closedforms::Conductivity;
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::linalg::CsrMatrix;

use super::radial::{graded_side, GridOptions};
use super::{one_sided_derivative, Field, FieldParameter, FvSystem, Mesh, DEFAULT_SOLVER_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfocalGrid {
    a: f64,
    b: f64,
    c: f64,
    mu: Vec<f64>,
    interface_index: usize,
    n_theta: usize,
}

fn ellipse_axes(shape: &Shape) -> Result<(f64, f64)> {
    match *shape {
        Shape::Ellipse2D { a, b } if a > b => Ok((a, b)),
        Shape::Ellipse2D { .. } => domain("confocal coordinates need a > b; use the radial solver for a circle"),
        _ => domain("confocal grids need an ellipse"),
    }
}

impl ConfocalGrid {
    /// Grid with interface `mu` spacing `h_mu`, growth `stretch`, largest
    /// spacing `max_spacing`, outer boundary `mu_max` and `n_theta` angles.
    pub fn new(
        shape: &Shape,
        h_mu: f64,
        stretch: f64,
        max_spacing: f64,
        mu_max: f64,
        n_theta: usize,
    ) -> Result<Self> {
        let (a, b) = ellipse_axes(shape)?;
        let c = (a * a - b * b).sqrt();
        let mu_i = (b / a).atanh();
        if !(h_mu > 0.0 && stretch >= 1.0 && max_spacing >= h_mu && mu_max > mu_i && n_theta >= 8 && n_theta % 2 == 0) {
            return domain("invalid confocal grid parameters");
        }
        let mut inner = Vec::new();
        let (mut p, mut h) = (mu_i, h_mu);
        while p > 1.5 * h {
            p -= h;
            inner.push(p);
            h = (h * stretch).min(max_spacing);
        }
        if inner.len() < 2 {
            return domain("confocal grid too coarse inside the ellipse");
        }
        inner.reverse();
        let interface_index = inner.len();
        let mut mu = inner;
        mu.push(mu_i);
        mu.extend(graded_side(mu_i, mu_max, h_mu, stretch, max_spacing));
        Ok(ConfocalGrid { a, b, c, mu, interface_index, n_theta })
    }

    /// Default grid at parameter `lambda`: the physical interface spacing is
    /// at most `finest_factor / sqrt(lambda / min sigma)` and the outer
    /// boundary lies `margin_factor` exterior decay lengths beyond the ellipse.
    pub fn for_lambda(shape: &Shape, cond: &Conductivity, lambda: f64, n_theta: usize, opts: &GridOptions) -> Result<Self> {
        let (a, b) = ellipse_axes(shape)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive, got {lambda}"));
        }
        let c = (a * a - b * b).sqrt();
        // the metric factor on the ellipse is at least c sinh(mu_I) = b
        let h_mu = opts.finest_factor / (lambda / cond.min()).sqrt() / b;
        let margin = opts.margin_factor / (lambda / cond.sigma_minus()).sqrt();
        let mu_max = ((a + margin) / c).acosh();
        let mu_i = (b / a).atanh();
        let hmax = (opts.max_spacing_fraction * mu_i).max(h_mu);
        Self::new(shape, h_mu, opts.stretch, hmax, mu_max, n_theta)
    }

    pub fn mu_nodes(&self) -> &[f64] {
        &self.mu
    }

    pub fn interface_index(&self) -> usize {
        self.interface_index
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dtheta()
    }

    pub fn len(&self) -> usize {
        self.mu.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical spacing normal to the ellipse at its flattest point.
    pub fn finest_physical(&self) -> f64 {
        let i = self.interface_index;
        let h = (self.mu[i] - self.mu[i - 1]).min(self.mu[i + 1] - self.mu[i]);
        h * self.b
    }

    pub fn point(&self, j: usize, i: usize) -> [f64; 2] {
        let (mu, th) = (self.mu[j], self.theta(i));
        [self.c * mu.cosh() * th.cos(), self.c * mu.sinh() * th.sin()]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.mu.len() {
            for i in 0..self.n_theta {
                out.push(self.point(j, i).to_vec());
            }
        }
        out
    }

    fn idx(&self, j: usize, i: usize) -> usize {
        j * self.n_theta + i
    }

    /// Values on the ellipse, indexed by `theta_i`.
    pub fn interface_values<'v>(&self, values: &'v [f64]) -> &'v [f64] {
        let s = self.idx(self.interface_index, 0);
        &values[s..s + self.n_theta]
    }

    /// Value on the ellipse at parametric angle `theta` (periodic cubic
    /// interpolation of the interface nodes).
    pub fn interface_value_at(&self, values: &[f64], theta: f64) -> f64 {
        let row = self.interface_values(values);
        periodic_cubic(row, theta / self.dtheta() - 0.5)
    }

    fn row_at_theta(&self, values: &[f64], j: usize, theta: f64) -> f64 {
        let s = self.idx(j, 0);
        periodic_linear(&values[s..s + self.n_theta], theta / self.dtheta() - 0.5)
    }

    /// Interpolates nodal values at a physical point; zero beyond the outer
    /// boundary.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let w = (Complex64::new(x, y) / self.c).acosh();
        let (mu, theta) = (w.re.abs(), if w.re < 0.0 { -w.im } else { w.im });
        let last = self.mu.len() - 1;
        if mu >= self.mu[last] {
            return 0.0;
        }
        let mu0 = self.mu[0];
        if mu < mu0 {
            // between the mirror image at -mu_0 and mu_0
            let lo = self.row_at_theta(values, 0, -theta);
            let hi = self.row_at_theta(values, 0, theta);
            let t = (mu + mu0) / (2.0 * mu0);
            return lo + t * (hi - lo);
        }
        let j = self.mu.partition_point(|&m| m <= mu) - 1;
        let t = (mu - self.mu[j]) / (self.mu[j + 1] - self.mu[j]);
        let lo = self.row_at_theta(values, j, theta);
        let hi = self.row_at_theta(values, j + 1, theta);
        lo + t * (hi - lo)
    }

    /// `(max flux residual, max jump)` over the interface nodes.
    pub(crate) fn transmission(&self, values: &[f64], sp: f64, sm: f64) -> (f64, f64) {
        let j = self.interface_index;
        let m = &self.mu;
        let mut flux: f64 = 0.0;
        for i in 0..self.n_theta {
            let v = |jj: usize| values[self.idx(jj, i)];
            let din = one_sided_derivative([m[j], m[j - 1], m[j - 2]], [v(j), v(j - 1), v(j - 2)]);
            let dout = one_sided_derivative([m[j], m[j + 1], m[j + 2]], [v(j), v(j + 1), v(j + 2)]);
            let th = self.theta(i);
            let metric = self.c * (m[j].sinh().powi(2) + th.sin().powi(2)).sqrt();
            flux = flux.max((sp * din - sm * dout).abs() / metric);
        }
        (flux, 0.0)
    }
}

fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

fn periodic_linear(row: &[f64], f: f64) -> f64 {
    let n = row.len();
    let k = f.floor();
    let t = f - k;
    let k = k as isize;
    (1.0 - t) * row[wrap(k, n)] + t * row[wrap(k + 1, n)]
}

fn periodic_cubic(row: &[f64], f: f64) -> f64 {
    let n = row.len();
    let k = f.floor();
    let t = f - k;
    let k = k as isize;
    let p = [row[wrap(k - 1, n)], row[wrap(k, n)], row[wrap(k + 1, n)], row[wrap(k + 2, n)]];
    // Lagrange weights on nodes -1, 0, 1, 2
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    p.iter().zip(w).map(|(v, w)| v * w).sum()
}

// antiderivatives of sinh^2 and sin^2
fn s_mu(mu: f64) -> f64 {
    0.25 * (2.0 * mu).sinh() - 0.5 * mu
}

fn s_theta(th: f64) -> f64 {
    0.5 * th - 0.25 * (2.0 * th).sin()
}

pub(crate) fn confocal_system(g: &ConfocalGrid, cond: &Conductivity) -> FvSystem {
    let n = g.n_theta;
    let m = g.mu.len() - 1; // Dirichlet row
    let iface = g.interface_index;
    let mu = &g.mu;
    let dth = g.dtheta();
    let c2 = g.c * g.c;
    let (sp, sm) = (cond.sigma_plus(), cond.sigma_minus());
    let nu = m * n;
    let mut trip = Vec::with_capacity(5 * nu);
    let mut mass = vec![0.0; nu];
    let mut inside_mass = vec![0.0; nu];
    let sigma_interval = |j: usize| if j < iface { sp } else { sm };
    for j in 0..m {
        let lo = if j == 0 { 0.0 } else { 0.5 * (mu[j - 1] + mu[j]) };
        let hi = 0.5 * (mu[j] + mu[j + 1]);
        let sigma_len = if j < iface {
            sp * (hi - lo)
        } else if j > iface {
            sm * (hi - lo)
        } else {
            sp * (mu[j] - lo) + sm * (hi - mu[j])
        };
        let t_theta = sigma_len / dth;
        let t_up = sigma_interval(j) * dth / (mu[j + 1] - mu[j]);
        let t_down = if j > 0 { sigma_interval(j - 1) * dth / (mu[j] - mu[j - 1]) } else { sp * dth / (2.0 * mu[0]) };
        for i in 0..n {
            let k = g.idx(j, i);
            let (th0, th1) = (i as f64 * dth, (i + 1) as f64 * dth);
            let vol = |a: f64, b: f64| c2 * ((s_mu(b) - s_mu(a)) * dth + (b - a) * (s_theta(th1) - s_theta(th0)));
            mass[k] = vol(lo, hi);
            if j < iface {
                inside_mass[k] = mass[k];
            } else if j == iface {
                inside_mass[k] = vol(lo, mu[j]);
            }
            let mut diag = 2.0 * t_theta + t_up + t_down;
            trip.push((k, g.idx(j, (i + 1) % n), -t_theta));
            trip.push((k, g.idx(j, (i + n - 1) % n), -t_theta));
            if j + 1 < m {
                trip.push((k, g.idx(j + 1, i), -t_up));
            }
            if j > 0 {
                trip.push((k, g.idx(j - 1, i), -t_down));
            } else {
                trip.push((k, g.idx(0, n - 1 - i), -t_down));
            }
            if diag <= 0.0 {
                diag = f64::MIN_POSITIVE;
            }
            trip.push((k, k, diag));
        }
    }
    FvSystem {
        stiffness: CsrMatrix::from_triplets(nu, trip),
        mass,
        inside_mass,
        load: vec![0.0; nu],
        lines: (0..n).map(|i| (0..m).map(|j| g.idx(j, i)).collect()).collect(),
        full_len: g.len(),
        unknown_to_full: (0..nu).collect(),
        fixed: (nu..g.len()).map(|k| (k, 0.0)).collect(),
    }
}

/// Interface-fitted solution of the two-phase Helmholtz problem for an ellipse.
pub fn solve_confocal(shape: &Shape, cond: &Conductivity, lambda: f64, grid: &ConfocalGrid) -> Result<Field> {
    let (a, b) = ellipse_axes(shape)?;
    if (a - grid.a).abs() > 1e-14 * a || (b - grid.b).abs() > 1e-14 * b {
        return domain("confocal grid was built for a different ellipse");
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let sys = confocal_system(grid, cond);
    let (values, stats) = sys.solve_helmholtz(lambda, DEFAULT_SOLVER_TOL)?;
    Ok(Field::from_values(Mesh::Confocal(grid.clone()), values, *shape, *cond, FieldParameter::Lambda(lambda))?
        .with_solver(stats))
}
