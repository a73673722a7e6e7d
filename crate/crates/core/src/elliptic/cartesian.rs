//! Cell-centred finite volumes on a uniform Cartesian grid in two dimensions.
//! Cell conductivity is sampled at the cell centre; faces use the harmonic
//! mean of the two adjacent cells; `U = 0` on the box boundary.

use crate::closedforms::Conductivity;
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::linalg::CsrMatrix;

use super::{Field, FieldParameter, FvSystem, Mesh, DEFAULT_SOLVER_TOL};

/// Smallest admissible box margin, in units of the exterior decay length.
pub const MIN_MARGIN_FACTOR: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid2D {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    h: f64,
    sigma: Vec<f64>,
    inside: Vec<bool>,
}

fn extent(shape: &Shape) -> Result<(f64, f64)> {
    match *shape {
        Shape::Ball { dim: 2, radius } => Ok((radius, radius)),
        Shape::Ellipse2D { a, b } => Ok((a, b)),
        _ => domain(format!("Cartesian grids support 2D balls and ellipses, not {}", shape.label())),
    }
}

impl CartesianGrid2D {
    /// Box `[-half_x, half_x] x [-half_y, half_y]` with `nx` cells across;
    /// `ny` is rounded up to keep the cells square and the box at least `half_y` tall.
    pub fn new(shape: &Shape, cond: &Conductivity, half_x: f64, half_y: f64, nx: usize) -> Result<Self> {
        let (ex, ey) = extent(shape)?;
        if !(half_x > ex && half_y > ey && nx >= 4) {
            return domain(format!(
                "box [{half_x} x {half_y}] with {nx} cells does not contain the shape"
            ));
        }
        let h = 2.0 * half_x / nx as f64;
        let ny = ((2.0 * half_y / h - 1e-9).ceil() as usize).max(4);
        let (x0, y0) = (-half_x, -0.5 * ny as f64 * h);
        let mut sigma = Vec::with_capacity(nx * ny);
        let mut inside = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = [x0 + (i as f64 + 0.5) * h, y0 + (j as f64 + 0.5) * h];
                let ins = shape.contains(&c);
                inside.push(ins);
                sigma.push(if ins { cond.sigma_plus() } else { cond.sigma_minus() });
            }
        }
        Ok(CartesianGrid2D { x0, y0, nx, ny, h, sigma, inside })
    }

    /// Box holding the shape plus `margin_factor` exterior decay lengths, with
    /// `nx` cells along the longer side.
    pub fn for_lambda(shape: &Shape, cond: &Conductivity, lambda: f64, nx: usize, margin_factor: f64) -> Result<Self> {
        if !(lambda > 0.0 && margin_factor > 0.0) {
            return domain("lambda and margin_factor must be positive");
        }
        let (ex, ey) = extent(shape)?;
        let margin = margin_factor / (lambda / cond.sigma_minus()).sqrt();
        Self::new(shape, cond, ex + margin, ey + margin, nx)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `(x_min, x_max, y_min, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x0, self.x0 + self.nx as f64 * self.h, self.y0, self.y0 + self.ny as f64 * self.h)
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x0 + (i as f64 + 0.5) * self.h, self.y0 + (j as f64 + 0.5) * self.h]
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.center(i, j).to_vec());
            }
        }
        out
    }

    pub fn cell_sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Smallest distance from the shape's bounding extent to the box edge.
    pub fn margin(&self, shape: &Shape) -> Result<f64> {
        let (ex, ey) = extent(shape)?;
        let (x0, x1, y0, y1) = self.bounds();
        Ok((x1 - ex).min(-x0 - ex).min(y1 - ey).min(-y0 - ey))
    }

    /// Bilinear interpolation of cell values; zero outside the box.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let (bx0, bx1, by0, by1) = self.bounds();
        if x < bx0 || x > bx1 || y < by0 || y > by1 {
            return 0.0;
        }
        let fx = ((x - self.x0) / self.h - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.h - 0.5).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = |i: usize, j: usize| values[j * self.nx + i];
        (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j)) + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1))
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

pub(crate) fn cartesian_system(g: &CartesianGrid2D) -> FvSystem {
    let (nx, ny) = (g.nx, g.ny);
    let n = nx * ny;
    let idx = |i: usize, j: usize| j * nx + i;
    let mut trip = Vec::with_capacity(5 * n);
    let cell = g.h * g.h;
    let mass = vec![cell; n];
    let mut inside_mass = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let k = idx(i, j);
            let s = g.sigma[k];
            if g.inside[k] {
                inside_mass[k] = cell;
            }
            let mut diag = 0.0;
            let mut couple = |ii: Option<usize>, jj: Option<usize>| match (ii, jj) {
                (Some(ii), Some(jj)) if ii < nx && jj < ny => {
                    let t = harmonic(s, g.sigma[idx(ii, jj)]);
                    trip.push((k, idx(ii, jj), -t));
                    diag += t;
                }
                // Dirichlet zero half a cell away
                _ => diag += 2.0 * s,
            };
            couple(i.checked_sub(1), Some(j));
            couple(Some(i + 1), Some(j));
            couple(Some(i), j.checked_sub(1));
            couple(Some(i), Some(j + 1));
            trip.push((k, k, diag));
        }
    }
    FvSystem {
        stiffness: CsrMatrix::from_triplets(n, trip),
        mass,
        inside_mass,
        load: vec![0.0; n],
        lines: (0..ny).map(|j| (0..nx).map(|i| idx(i, j)).collect()).collect(),
        full_len: n,
        unknown_to_full: (0..n).collect(),
        fixed: Vec::new(),
    }
}

/// Cartesian finite-volume solution of the two-phase Helmholtz problem.
pub fn solve_cartesian_2d(shape: &Shape, cond: &Conductivity, lambda: f64, grid: &CartesianGrid2D) -> Result<Field> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let needed = MIN_MARGIN_FACTOR / (lambda / cond.sigma_minus()).sqrt();
    let margin = grid.margin(shape)?;
    if margin < needed * (1.0 - 1e-9) {
        return domain(format!(
            "grid margin {margin} does not resolve the exterior decay (need {needed})"
        ));
    }
    let sys = cartesian_system(grid);
    let (values, stats) = sys.solve_helmholtz(lambda, DEFAULT_SOLVER_TOL)?;
    Ok(Field::from_values(Mesh::Cartesian(grid.clone()), values, *shape, *cond, FieldParameter::Lambda(lambda))?
        .with_solver(stats))
}
