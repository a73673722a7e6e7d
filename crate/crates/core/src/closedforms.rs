//! Closed-form profiles of the two-phase transmission problem: the one-phase
//! heat profile `f`, its Laplace transform `F`, the two-phase profiles `Phi`,
//! `psi`, `Psi_lambda`, and the blow-up limit `S_*`.
//!
//! Writing `s± = sqrt(sigma±)` and `S = s+ + s-`, the leading constants are
//!
//! * interface value `c_inf = s+ / S`,
//! * parabolic curvature coefficient `2 s+ s- / (3 sqrt(pi) S)`,
//! * elliptic curvature coefficient `s+ s- / (2 S)`.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::specfun::{erf, erfc};

/// Which phase a one-sided quantity refers to. `Inside` is `Omega` (`+`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductivity {
    sigma_plus: f64,
    sigma_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaConstants {
    pub interface_constant: f64,
    pub parabolic_coeff: f64,
    pub elliptic_coeff: f64,
}

impl Conductivity {
    pub fn new(sigma_plus: f64, sigma_minus: f64) -> Result<Self> {
        for (name, v) in [("sigma_plus", sigma_plus), ("sigma_minus", sigma_minus)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(Conductivity { sigma_plus, sigma_minus })
    }

    pub fn sigma_plus(&self) -> f64 {
        self.sigma_plus
    }

    pub fn sigma_minus(&self) -> f64 {
        self.sigma_minus
    }

    pub fn sigma(&self, side: Side) -> f64 {
        match side {
            Side::Inside => self.sigma_plus,
            Side::Outside => self.sigma_minus,
        }
    }

    pub fn max(&self) -> f64 {
        self.sigma_plus.max(self.sigma_minus)
    }

    pub fn min(&self) -> f64 {
        self.sigma_plus.min(self.sigma_minus)
    }

    /// Conductivity at a point: `sigma+` in `Omega`, `sigma-` outside.
    pub fn at(&self, shape: &Shape, x: &[f64]) -> f64 {
        if shape.contains(x) {
            self.sigma_plus
        } else {
            self.sigma_minus
        }
    }

    fn roots(&self) -> (f64, f64, f64) {
        let (p, m) = (self.sigma_plus.sqrt(), self.sigma_minus.sqrt());
        (p, m, p + m)
    }

    pub fn constants(&self) -> FormulaConstants {
        let (p, m, s) = self.roots();
        FormulaConstants {
            interface_constant: p / s,
            parabolic_coeff: 2.0 * p * m / (3.0 * PI.sqrt() * s),
            elliptic_coeff: p * m / (2.0 * s),
        }
    }
}

/// `c_inf = sqrt(sigma+) / (sqrt(sigma+) + sqrt(sigma-))`.
pub fn interface_constant(cond: &Conductivity) -> f64 {
    cond.constants().interface_constant
}

/// `f(xi) = (1 + erf(xi/2)) / 2`; infinite arguments return the limits.
pub fn f_profile(xi: f64) -> f64 {
    if xi == f64::INFINITY {
        return 1.0;
    }
    if xi == f64::NEG_INFINITY {
        return 0.0;
    }
    if xi >= 0.0 {
        0.5 * (1.0 + erf(0.5 * xi).unwrap_or(1.0))
    } else {
        0.5 * erfc(-0.5 * xi).unwrap_or(0.0)
    }
}

/// `f'(xi) = exp(-xi^2/4) / (2 sqrt(pi))`.
pub fn f_profile_prime(xi: f64) -> f64 {
    (-0.25 * xi * xi).exp() / (2.0 * PI.sqrt())
}

/// `f''(xi) = -(xi/2) f'(xi)`.
pub fn f_profile_second(xi: f64) -> f64 {
    -0.5 * xi * f_profile_prime(xi)
}

/// Laplace transform profile `F(eta) = 1 - e^{-eta}/2` for `eta > 0` and
/// `e^{eta}/2` otherwise.
pub fn laplace_profile(eta: f64) -> f64 {
    if eta > 0.0 {
        1.0 - 0.5 * (-eta).exp()
    } else {
        0.5 * eta.exp()
    }
}

/// `F'(eta) = e^{-|eta|} / 2`.
pub fn laplace_profile_prime(eta: f64) -> f64 {
    0.5 * (-eta.abs()).exp()
}

/// Two-phase profile `Phi(eta)`, continuous with continuous flux at 0.
pub fn phi_profile(eta: f64, cond: &Conductivity) -> f64 {
    let (p, m, s) = cond.roots();
    if eta > 0.0 {
        (2.0 * m / s) * (laplace_profile(eta / p) + (p - m) / (2.0 * m))
    } else {
        (2.0 * p / s) * laplace_profile(eta / m)
    }
}

/// One-sided derivative of `Phi`. At `eta = 0` the side selects the branch.
pub fn phi_prime(eta: f64, cond: &Conductivity, side: Side) -> f64 {
    let (p, m, s) = cond.roots();
    match branch(eta, side) {
        Side::Inside => m / (s * p) * (-eta / p).exp(),
        Side::Outside => p / (s * m) * (eta / m).exp(),
    }
}

/// One-sided second derivative of `Phi`.
pub fn phi_second(eta: f64, cond: &Conductivity, side: Side) -> f64 {
    let (p, m, _) = cond.roots();
    match branch(eta, side) {
        Side::Inside => -phi_prime(eta, cond, Side::Inside) / p,
        Side::Outside => phi_prime(eta, cond, Side::Outside) / m,
    }
}

fn branch(eta: f64, side: Side) -> Side {
    if eta > 0.0 {
        Side::Inside
    } else if eta < 0.0 {
        Side::Outside
    } else {
        side
    }
}

/// Two-phase self-similar profile in time,
/// `g(xi)` with `g = (2 s-/S)(f(xi/s+) + (s+ - s-)/(2 s-))` inside and
/// `(2 s+/S) f(xi/s-)` outside.
pub fn psi_profile(xi: f64, cond: &Conductivity) -> f64 {
    let (p, m, s) = cond.roots();
    if xi > 0.0 {
        (2.0 * m / s) * (f_profile(xi / p) + (p - m) / (2.0 * m))
    } else {
        (2.0 * p / s) * f_profile(xi / m)
    }
}

/// `psi(x, t) = g(delta(x) / sqrt(t))`, the parabolic interface approximation.
pub fn psi(x: &[f64], t: f64, shape: &Shape, cond: &Conductivity) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time must be positive, got {t}"));
    }
    let d = shape.signed_distance(x)?;
    Ok(psi_profile(d / t.sqrt(), cond))
}

/// `Psi_lambda(x) = Phi(sqrt(lambda) delta(x))`, the elliptic approximation.
pub fn psi_lambda(x: &[f64], lambda: f64, shape: &Shape, cond: &Conductivity) -> Result<f64> {
    check_lambda(lambda)?;
    let d = shape.signed_distance(x)?;
    Ok(phi_profile(lambda.sqrt() * d, cond))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    Ok(())
}

/// Right-hand side of `psi_t - sigma Laplacian(psi)` at a tube point off the
/// interface: `-(2 s+ s-/S) t^{-1/2} Lap(delta) f'(sigma^{-1/2} t^{-1/2} delta)`.
pub fn psi_residual(x: &[f64], t: f64, shape: &Shape, cond: &Conductivity) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time must be positive, got {t}"));
    }
    let d = shape.signed_distance(x)?;
    let lap = shape.laplacian_signed_distance(x)?;
    let (p, m, s) = cond.roots();
    let root_sigma = if d > 0.0 { p } else { m };
    Ok(-(2.0 * p * m / s) / t.sqrt() * lap * f_profile_prime(d / (root_sigma * t.sqrt())))
}

/// Right-hand side of `-sigma Lap(Psi) + lambda (Psi - chi_Omega)` at a tube
/// point off the interface:
/// `-(s+ s-/S) sqrt(lambda) Lap(delta) exp(-sigma^{-1/2} sqrt(lambda) |delta|)`.
pub fn psi_lambda_residual(
    x: &[f64],
    lambda: f64,
    shape: &Shape,
    cond: &Conductivity,
) -> Result<f64> {
    check_lambda(lambda)?;
    let d = shape.signed_distance(x)?;
    let lap = shape.laplacian_signed_distance(x)?;
    let (p, m, s) = cond.roots();
    let root_sigma = if d > 0.0 { p } else { m };
    Ok(-(p * m / s) * lambda.sqrt() * lap * (-lambda.sqrt() * d.abs() / root_sigma).exp())
}

/// Blow-up limit profile `S_*(z)` for the given curvature term
/// `(N-1) H` in the convention where `Lap(delta) = (N-1) H` on the interface.
/// `z > 0` points into `Omega`.
pub fn s_star(z: f64, cond: &Conductivity, curvature_term: f64) -> f64 {
    let (p, m, s) = cond.roots();
    if z > 0.0 {
        curvature_term * m / (2.0 * s) * (z + p) * (-z / p).exp()
    } else {
        curvature_term * p / (2.0 * s) * (m - z) * (z / m).exp()
    }
}

/// One-sided derivative of `S_*`; it vanishes at `z = 0` from both sides.
pub fn s_star_prime(z: f64, cond: &Conductivity, curvature_term: f64, side: Side) -> f64 {
    let (p, m, s) = cond.roots();
    match branch(z, side) {
        Side::Inside => -curvature_term * m / (2.0 * s) * z / p * (-z / p).exp(),
        Side::Outside => -curvature_term * p / (2.0 * s) * z / m * (z / m).exp(),
    }
}

/// One-sided second derivative of `S_*`.
pub fn s_star_second(z: f64, cond: &Conductivity, curvature_term: f64, side: Side) -> f64 {
    let (p, m, s) = cond.roots();
    match branch(z, side) {
        Side::Inside => -curvature_term * m / (2.0 * s * p) * (1.0 - z / p) * (-z / p).exp(),
        Side::Outside => -curvature_term * p / (2.0 * s * m) * (1.0 + z / m) * (z / m).exp(),
    }
}
