//! Closed-form radial solution of the two-phase modified Helmholtz problem on
//! a ball in dimensions two and three.

use crate::closedforms::{Conductivity, Side};
use crate::error::{domain, Error, Result};
use crate::geometry::{norm, Shape};
use crate::specfun::{bessel_i_scaled, bessel_k_scaled, gamma_fn, BesselOrder};

use super::ScalarField;

/// `U(r) = 1 + A g_I(r)` for `r < R` and `B g_K(r)` for `r > R`, where
/// `g_I = r^{-nu} I_nu(k+ r) / (R^{-nu} I_nu(k+ R))`,
/// `g_K = r^{-nu} K_nu(k- r) / (R^{-nu} K_nu(k- R))`, `nu = N/2 - 1` and
/// `k± = sqrt(lambda / sigma±)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselSolution {
    dim: usize,
    radius: f64,
    cond: Conductivity,
    lambda: f64,
    order: BesselOrder,
    k_plus: f64,
    k_minus: f64,
    a: f64,
    b: f64,
    // e^{-k+ R} I_nu(k+ R) and e^{k- R} K_nu(k- R)
    i_at_r: f64,
    k_at_r: f64,
}

pub fn solve_radial_bessel(ball: &Shape, cond: &Conductivity, lambda: f64) -> Result<BesselSolution> {
    let (dim, radius) = match *ball {
        Shape::Ball { dim, radius } => (dim, radius),
        _ => return domain("solve_radial_bessel needs a ball"),
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let order = BesselOrder::radial(dim)?;
    let next = order.next().expect("radial orders have a successor");
    let k_plus = (lambda / cond.sigma_plus()).sqrt();
    let k_minus = (lambda / cond.sigma_minus()).sqrt();
    let xi = k_plus * radius;
    let xk = k_minus * radius;
    let i_at_r = bessel_i_scaled(order, xi)?;
    let k_at_r = bessel_k_scaled(order, xk)?;
    let p = cond.sigma_plus() * k_plus * bessel_i_scaled(next, xi)? / i_at_r;
    let q = cond.sigma_minus() * k_minus * bessel_k_scaled(next, xk)? / k_at_r;
    let det = p + q;
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::Numeric(format!("singular matching system at lambda={lambda}")));
    }
    Ok(BesselSolution {
        dim,
        radius,
        cond: *cond,
        lambda,
        order,
        k_plus,
        k_minus,
        a: -q / det,
        b: p / det,
        i_at_r,
        k_at_r,
    })
}

impl BesselSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.cond
    }

    /// Matching coefficients `(A, B)`; `B = 1 + A = U(R)`.
    pub fn coefficients(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn interface_value(&self) -> f64 {
        self.b
    }

    fn nu(&self) -> f64 {
        self.order.nu()
    }

    // r^{-nu} I_mu(k r) / (R^{-nu} I_nu(k R)) for mu in {nu, nu+1}
    fn i_ratio(&self, order: BesselOrder, r: f64) -> f64 {
        let (k, big_r, nu) = (self.k_plus, self.radius, self.nu());
        if r == 0.0 {
            if order != self.order {
                return 0.0;
            }
            // r^{-nu} I_nu(k r) -> (k/2)^nu / Gamma(nu + 1)
            let lim = (0.5 * k).powf(nu) / gamma_fn(nu + 1.0).expect("nu + 1 > 0");
            return lim * big_r.powf(nu) * (-k * big_r).exp() / self.i_at_r;
        }
        let i = bessel_i_scaled(order, k * r).expect("positive argument");
        (r / big_r).powf(-nu) * (k * (r - big_r)).exp() * i / self.i_at_r
    }

    fn k_ratio(&self, order: BesselOrder, r: f64) -> f64 {
        let (k, big_r, nu) = (self.k_minus, self.radius, self.nu());
        let kv = bessel_k_scaled(order, k * r).expect("positive argument");
        (r / big_r).powf(-nu) * (-k * (r - big_r)).exp() * kv / self.k_at_r
    }

    /// `U(r)`; at `r = R` the common interface value.
    pub fn value(&self, r: f64) -> f64 {
        if r < self.radius {
            1.0 + self.a * self.i_ratio(self.order, r)
        } else if r > self.radius {
            self.b * self.k_ratio(self.order, r)
        } else {
            self.b
        }
    }

    /// Radial derivative; `side` picks the branch at `r = R`.
    pub fn derivative(&self, r: f64, side: Side) -> f64 {
        let next = self.order.next().expect("radial orders have a successor");
        if r < self.radius || (r == self.radius && side == Side::Inside) {
            self.a * self.k_plus * self.i_ratio(next, r)
        } else {
            -self.b * self.k_minus * self.k_ratio(next, r)
        }
    }

    /// Second radial derivative; `side` picks the branch at `r = R`.
    pub fn second_derivative(&self, r: f64, side: Side) -> f64 {
        let next = self.order.next().expect("radial orders have a successor");
        let n1 = (self.dim - 1) as f64;
        if r < self.radius || (r == self.radius && side == Side::Inside) {
            let k = self.k_plus;
            if r == 0.0 {
                // U'' (0) = lambda (U(0) - 1) / (N sigma+)
                return self.lambda * (self.value(0.0) - 1.0) / (self.dim as f64 * self.cond.sigma_plus());
            }
            self.a * k * (k * self.i_ratio(self.order, r) - n1 / r * self.i_ratio(next, r))
        } else {
            let k = self.k_minus;
            self.b * k * (k * self.k_ratio(self.order, r) + n1 / r * self.k_ratio(next, r))
        }
    }

    /// `-sigma (U'' + (N-1)/r U') + lambda (U - chi)` at `r != R`, `r > 0`.
    pub fn residual(&self, r: f64) -> f64 {
        let side = if r < self.radius { Side::Inside } else { Side::Outside };
        let chi = if side == Side::Inside { 1.0 } else { 0.0 };
        let lap = self.second_derivative(r, side) + (self.dim - 1) as f64 / r * self.derivative(r, side);
        -self.cond.sigma(side) * lap + self.lambda * (self.value(r) - chi)
    }
}

impl ScalarField for BesselSolution {
    fn value_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return domain(format!("point has {} coordinates, expected {}", x.len(), self.dim));
        }
        Ok(self.value(norm(x)))
    }
}
