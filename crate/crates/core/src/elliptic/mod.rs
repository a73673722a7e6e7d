//! Solvers for the two-phase modified Helmholtz problem
//! `-div(sigma grad U) + lambda U = lambda chi_Omega`:
//! a closed-form Bessel solution on balls, a radial (and planar) finite-volume
//! solver on interface-fitted graded grids, a Cartesian finite-volume solver,
//! and an interface-fitted solver in confocal elliptic coordinates.

mod bessel;
mod cartesian;
mod confocal;
mod radial;

use std::io::{self, Write};

pub use bessel::{solve_radial_bessel, BesselSolution};
pub use cartesian::{solve_cartesian_2d, CartesianGrid2D};
pub use confocal::{solve_confocal, ConfocalGrid};
pub use radial::{
    solve_planar_fd, solve_planar_fd_with_estimate, solve_radial_fd, solve_radial_fd_with_estimate, GridOptions, PlanarGrid,
    RadialGrid,
};

pub(crate) use cartesian::cartesian_system;
pub(crate) use confocal::confocal_system;
pub(crate) use radial::{check_fitted, planar_system, radial_system};

use crate::closedforms::{Conductivity, Side};
use crate::csvio::format_g17;
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::linalg::{pcg, CgStats, CsrMatrix, Preconditioner};

/// Relative residual used by the iterative solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;
pub(crate) const MAX_CG_ITER: usize = 20_000;

/// Anything that can be evaluated at a point of space.
pub trait ScalarField {
    fn value_at(&self, x: &[f64]) -> Result<f64>;
}

impl<F: Fn(&[f64]) -> Result<f64>> ScalarField for F {
    fn value_at(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mesh {
    Radial { dim: usize, grid: RadialGrid },
    Planar { dim: usize, grid: PlanarGrid },
    Cartesian(CartesianGrid2D),
    Confocal(ConfocalGrid),
}

impl Mesh {
    /// Coordinates of every degree of freedom, in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Mesh::Radial { dim, grid } => grid
                .nodes()
                .iter()
                .map(|&r| {
                    let mut p = vec![0.0; *dim];
                    p[0] = r;
                    p
                })
                .collect(),
            Mesh::Planar { dim, grid } => grid
                .nodes()
                .iter()
                .map(|&s| {
                    let mut p = vec![0.0; *dim];
                    p[dim - 1] = s;
                    p
                })
                .collect(),
            Mesh::Cartesian(g) => g.centers(),
            Mesh::Confocal(g) => g.points(),
        }
    }

    /// Smallest spacing normal to the interface.
    pub fn finest_spacing(&self) -> f64 {
        match self {
            Mesh::Radial { grid, .. } => grid.finest(),
            Mesh::Planar { grid, .. } => grid.finest(),
            Mesh::Cartesian(g) => g.h(),
            Mesh::Confocal(g) => g.finest_physical(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Mesh::Radial { grid, .. } => grid.nodes().len(),
            Mesh::Planar { grid, .. } => grid.nodes().len(),
            Mesh::Cartesian(g) => g.nx() * g.ny(),
            Mesh::Confocal(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn descriptor(&self) -> String {
        match self {
            Mesh::Radial { grid, .. } => format!(
                "radial(nodes={};finest={:e};stretch={})",
                grid.nodes().len(),
                grid.finest(),
                grid.stretch()
            ),
            Mesh::Planar { grid, .. } => {
                format!("planar(nodes={};finest={:e})", grid.nodes().len(), grid.finest())
            }
            Mesh::Cartesian(g) => format!("cartesian({}x{};h={:e})", g.nx(), g.ny(), g.h()),
            Mesh::Confocal(g) => format!("confocal({}x{})", g.n_theta(), g.mu_nodes().len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldParameter {
    Lambda(f64),
    Time(f64),
}

/// Discrete solution on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Mesh,
    values: Vec<f64>,
    shape: Shape,
    cond: Conductivity,
    parameter: FieldParameter,
    error_estimate: f64,
    solver: Option<CgStats>,
}

impl Field {
    /// Wraps externally produced values; fails on a length mismatch.
    pub fn from_values(
        mesh: Mesh,
        values: Vec<f64>,
        shape: Shape,
        cond: Conductivity,
        parameter: FieldParameter,
    ) -> Result<Self> {
        if mesh.len() != values.len() {
            return domain(format!("mesh has {} points but {} values given", mesh.len(), values.len()));
        }
        Ok(Field { mesh, values, shape, cond, parameter, error_estimate: 0.0, solver: None })
    }

    pub(crate) fn with_solver(mut self, stats: CgStats) -> Self {
        self.solver = Some(stats);
        self
    }

    pub fn with_error_estimate(mut self, e: f64) -> Self {
        self.error_estimate = e;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.cond
    }

    pub fn parameter(&self) -> FieldParameter {
        self.parameter
    }

    /// Discretization error estimate (zero unless set by a mesh-halving solve).
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn solver_stats(&self) -> Option<CgStats> {
        self.solver
    }

    /// `(point, value)` for every degree of freedom.
    pub fn samples(&self) -> Vec<(Vec<f64>, f64)> {
        self.mesh.points().into_iter().zip(self.values.iter().copied()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let param = match self.parameter {
            FieldParameter::Lambda(l) => format!("lambda={}", format_g17(l)),
            FieldParameter::Time(t) => format!("t={}", format_g17(t)),
        };
        writeln!(
            w,
            "# {param} sigma_plus={} sigma_minus={} shape={}",
            format_g17(self.cond.sigma_plus()),
            format_g17(self.cond.sigma_minus()),
            self.shape.label()
        )?;
        match &self.mesh {
            Mesh::Radial { grid, .. } => {
                writeln!(w, "r,value")?;
                for (r, v) in grid.nodes().iter().zip(&self.values) {
                    writeln!(w, "{},{}", format_g17(*r), format_g17(*v))?;
                }
            }
            Mesh::Planar { grid, .. } => {
                writeln!(w, "s,value")?;
                for (s, v) in grid.nodes().iter().zip(&self.values) {
                    writeln!(w, "{},{}", format_g17(*s), format_g17(*v))?;
                }
            }
            _ => {
                writeln!(w, "x,y,value")?;
                for (p, v) in self.mesh.points().iter().zip(&self.values) {
                    writeln!(w, "{},{},{}", format_g17(p[0]), format_g17(p[1]), format_g17(*v))?;
                }
            }
        }
        Ok(())
    }
}

impl ScalarField for Field {
    fn value_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.shape.dim() {
            return domain(format!("point has {} coordinates, expected {}", x.len(), self.shape.dim()));
        }
        match &self.mesh {
            Mesh::Radial { grid, .. } => Ok(interp_1d(grid.nodes(), &self.values, crate::geometry::norm(x))),
            Mesh::Planar { grid, .. } => Ok(interp_1d(grid.nodes(), &self.values, x[x.len() - 1])),
            Mesh::Cartesian(g) => Ok(g.interpolate(&self.values, x[0], x[1])),
            Mesh::Confocal(g) => Ok(g.interpolate(&self.values, x[0], x[1])),
        }
    }
}

/// Piecewise-linear interpolation, constant beyond the end nodes.
pub(crate) fn interp_1d(nodes: &[f64], values: &[f64], s: f64) -> f64 {
    let n = nodes.len();
    if s <= nodes[0] {
        return values[0];
    }
    if s >= nodes[n - 1] {
        return values[n - 1];
    }
    let j = nodes.partition_point(|&v| v <= s) - 1;
    let t = (s - nodes[j]) / (nodes[j + 1] - nodes[j]);
    values[j] + t * (values[j + 1] - values[j])
}

/// Derivative at `x[0]` of the quadratic through three points.
pub(crate) fn one_sided_derivative(x: [f64; 3], u: [f64; 3]) -> f64 {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let l0 = (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (x0 - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (x0 - x1) / ((x2 - x0) * (x2 - x1));
    u[0] * l0 + u[1] * l1 + u[2] * l2
}

/// Finite-volume system `(A, M, M_in, g)` for a mesh: the elliptic problem is
/// `(A + lambda M) U = lambda M_in + g`, the parabolic one `M u' + A u = g`,
/// where `g` collects the Dirichlet boundary couplings.
#[derive(Debug, Clone)]
pub(crate) struct FvSystem {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub inside_mass: Vec<f64>,
    pub load: Vec<f64>,
    pub lines: Vec<Vec<usize>>,
    pub full_len: usize,
    pub unknown_to_full: Vec<usize>,
    pub fixed: Vec<(usize, f64)>,
}

impl FvSystem {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_len];
        for (k, &i) in self.unknown_to_full.iter().enumerate() {
            full[i] = u[k];
        }
        for &(i, v) in &self.fixed {
            full[i] = v;
        }
        full
    }

    pub fn preconditioner(&self) -> Preconditioner {
        if self.lines.is_empty() {
            Preconditioner::Jacobi
        } else {
            Preconditioner::Lines(self.lines.clone())
        }
    }

    /// Solves the elliptic system; returns full-length values.
    pub fn solve_helmholtz(&self, lambda: f64, tol: f64) -> Result<(Vec<f64>, CgStats)> {
        let a = self.stiffness.scaled_plus_diagonal(1.0, &self.mass.iter().map(|m| lambda * m).collect::<Vec<_>>());
        let b: Vec<f64> = (0..self.n()).map(|i| lambda * self.inside_mass[i] + self.load[i]).collect();
        // chi_Omega is a good first guess away from the interface
        let mut x: Vec<f64> = (0..self.n()).map(|i| self.inside_mass[i] / self.mass[i]).collect();
        let stats = pcg(&a, &b, &mut x, &self.preconditioner(), tol, MAX_CG_ITER)?;
        Ok((self.embed(&x), stats))
    }
}

/// Interface transmission diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionReport {
    /// max |sigma+ d_nu U+ - sigma- d_nu U-|
    pub flux_residual: f64,
    /// max |U+ - U-|
    pub jump_residual: f64,
    pub mesh_size: f64,
    pub samples: usize,
}

/// Transmission residuals of a discrete field, from one-sided three-point
/// differences normal to the interface.
pub fn transmission_residual(field: &Field, shape: &Shape, cond: &Conductivity) -> Result<TransmissionReport> {
    let (sp, sm) = (cond.sigma_plus(), cond.sigma_minus());
    let v = field.values();
    match field.mesh() {
        Mesh::Radial { grid, .. } => {
            let (r, i) = (grid.nodes(), grid.interface_index());
            if i < 2 || i + 2 >= r.len() {
                return domain("radial grid too coarse around the interface");
            }
            // d/dr; the outward normal is +r
            let din = one_sided_derivative([r[i], r[i - 1], r[i - 2]], [v[i], v[i - 1], v[i - 2]]);
            let dout = one_sided_derivative([r[i], r[i + 1], r[i + 2]], [v[i], v[i + 1], v[i + 2]]);
            Ok(TransmissionReport {
                flux_residual: (sp * din - sm * dout).abs(),
                jump_residual: 0.0,
                mesh_size: grid.finest(),
                samples: 1,
            })
        }
        Mesh::Planar { grid, .. } => {
            let (s, i) = (grid.nodes(), grid.interface_index());
            if i < 2 || i + 2 >= s.len() {
                return domain("planar grid too coarse around the interface");
            }
            // inside is s > 0; the outward normal is -s
            let din = one_sided_derivative([s[i], s[i + 1], s[i + 2]], [v[i], v[i + 1], v[i + 2]]);
            let dout = one_sided_derivative([s[i], s[i - 1], s[i - 2]], [v[i], v[i - 1], v[i - 2]]);
            Ok(TransmissionReport {
                flux_residual: (sp * din - sm * dout).abs(),
                jump_residual: 0.0,
                mesh_size: grid.finest(),
                samples: 1,
            })
        }
        Mesh::Confocal(g) => {
            let (flux, jump) = g.transmission(v, sp, sm);
            Ok(TransmissionReport { flux_residual: flux, jump_residual: jump, mesh_size: g.finest_physical(), samples: g.n_theta() })
        }
        Mesh::Cartesian(g) => {
            let h = g.h();
            let mut flux: f64 = 0.0;
            let mut jump: f64 = 0.0;
            let pts = shape.interface_samples(64)?;
            for q in &pts {
                let nu = shape.outward_normal(q)?;
                let at = |s: f64| g.interpolate(v, q[0] + s * nu[0], q[1] + s * nu[1]);
                let (i1, i2, i3) = (at(-h), at(-2.0 * h), at(-3.0 * h));
                let (o1, o2, o3) = (at(h), at(2.0 * h), at(3.0 * h));
                let u_in = 3.0 * i1 - 3.0 * i2 + i3;
                let u_out = 3.0 * o1 - 3.0 * o2 + o3;
                // derivative along +nu from both sides
                let d_in = -(-2.5 * i1 + 4.0 * i2 - 1.5 * i3) / h;
                let d_out = (-2.5 * o1 + 4.0 * o2 - 1.5 * o3) / h;
                flux = flux.max((sp * d_in - sm * d_out).abs());
                jump = jump.max((u_in - u_out).abs());
            }
            Ok(TransmissionReport { flux_residual: flux, jump_residual: jump, mesh_size: h, samples: pts.len() })
        }
    }
}

impl BesselSolution {
    /// Transmission residuals of the closed form at the interface.
    pub fn transmission_residual(&self) -> TransmissionReport {
        let r = self.radius();
        let cond = self.conductivity();
        let fi = cond.sigma_plus() * self.derivative(r, Side::Inside);
        let fo = cond.sigma_minus() * self.derivative(r, Side::Outside);
        let below = self.value(r * (1.0 - f64::EPSILON));
        let above = self.value(r * (1.0 + f64::EPSILON));
        TransmissionReport {
            flux_residual: (fi - fo).abs(),
            jump_residual: (below - above).abs(),
            mesh_size: 0.0,
            samples: 1,
        }
    }
}
