//! Interface geometry: signed distance, normals, mean curvature and the
//! Laplacian of the signed distance for a small catalog of shapes.
//!
//! Conventions: `Omega` is the interior of the shape, the signed distance is
//! positive inside and negative outside, and `mean_curvature` is positive for
//! convex `Omega` (a sphere of radius `R` has `H = 1/R`). With this sign,
//! `laplacian_signed_distance = -(N-1) H` on the interface.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Interface distance below which a point counts as lying on the interface.
pub const ON_INTERFACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Ball of the given radius centred at the origin.
    Ball { dim: usize, radius: f64 },
    /// Ellipse `(x/a)^2 + (y/b)^2 < 1` with `a >= b`.
    Ellipse2D { a: f64, b: f64 },
    /// Upper half-space `x_N > 0`.
    HalfSpace { dim: usize },
}

/// Nearest interface point of a query point together with the local geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct FootPoint {
    pub point: Vec<f64>,
    pub signed_distance: f64,
    /// Outward unit normal at the foot point.
    pub normal: Vec<f64>,
    /// Mean curvature at the foot point.
    pub mean_curvature: f64,
}

impl Shape {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return domain(format!("ball dimension must be >= 2, got {dim}"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("ball radius must be positive, got {radius}"));
        }
        Ok(Shape::Ball { dim, radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && a >= b && a.is_finite()) {
            return domain(format!("ellipse semi-axes need a >= b > 0, got a={a}, b={b}"));
        }
        Ok(Shape::Ellipse2D { a, b })
    }

    pub fn half_space(dim: usize) -> Result<Self> {
        if dim < 2 {
            return domain(format!("half-space dimension must be >= 2, got {dim}"));
        }
        Ok(Shape::HalfSpace { dim })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Shape::Ball { dim, .. } | Shape::HalfSpace { dim } => dim,
            Shape::Ellipse2D { .. } => 2,
        }
    }

    /// Half-width of the open tube `|delta| < tube_radius` on which the signed
    /// distance is C^2.
    pub fn tube_radius(&self) -> f64 {
        match *self {
            Shape::Ball { radius, .. } => radius,
            Shape::Ellipse2D { a, b } => b * b / a,
            Shape::HalfSpace { .. } => f64::INFINITY,
        }
    }

    /// Length scale used for default time windows: the radius, the minor
    /// semi-axis, or one for the half-space.
    pub fn length_scale(&self) -> f64 {
        match *self {
            Shape::Ball { radius, .. } => radius,
            Shape::Ellipse2D { b, .. } => b,
            Shape::HalfSpace { .. } => 1.0,
        }
    }

    /// Short label used in CSV metadata.
    pub fn label(&self) -> String {
        match *self {
            Shape::Ball { dim, radius } => format!("ball(N={dim};R={radius})"),
            Shape::Ellipse2D { a, b } => format!("ellipse(a={a};b={b})"),
            Shape::HalfSpace { dim } => format!("halfspace(N={dim})"),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return domain(format!(
                "point has {} coordinates, shape is {}-dimensional",
                x.len(),
                self.dim()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return domain(format!("point {x:?} is not finite"));
        }
        Ok(())
    }

    /// Whether `x` lies in `Omega` (open set).
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Shape::Ball { radius, .. } => norm(x) < radius,
            Shape::Ellipse2D { a, b } => (x[0] / a).powi(2) + (x[1] / b).powi(2) < 1.0,
            Shape::HalfSpace { .. } => x[x.len() - 1] > 0.0,
        }
    }

    /// Signed distance to the interface, positive inside `Omega`.
    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        match *self {
            Shape::Ball { radius, .. } => Ok(radius - norm(x)),
            Shape::HalfSpace { .. } => Ok(x[x.len() - 1]),
            Shape::Ellipse2D { .. } => Ok(self.foot_point(x)?.signed_distance),
        }
    }

    /// Nearest interface point. Fails at points with no unique foot point
    /// (the centre of a ball).
    pub fn foot_point(&self, x: &[f64]) -> Result<FootPoint> {
        self.check_point(x)?;
        match *self {
            Shape::Ball { dim, radius } => {
                let r = norm(x);
                if r == 0.0 {
                    return domain("the centre of a ball has no unique nearest interface point");
                }
                let normal: Vec<f64> = x.iter().map(|v| v / r).collect();
                Ok(FootPoint {
                    point: normal.iter().map(|v| v * radius).collect(),
                    signed_distance: radius - r,
                    normal,
                    mean_curvature: if dim > 1 { 1.0 / radius } else { 0.0 },
                })
            }
            Shape::HalfSpace { dim } => {
                let mut point = x.to_vec();
                point[dim - 1] = 0.0;
                let mut normal = vec![0.0; dim];
                normal[dim - 1] = -1.0;
                Ok(FootPoint {
                    point,
                    signed_distance: x[dim - 1],
                    normal,
                    mean_curvature: 0.0,
                })
            }
            Shape::Ellipse2D { a, b } => ellipse_foot(a, b, x),
        }
    }

    /// Whether `x` lies in the open tube where the signed distance is C^2.
    pub fn in_tube(&self, x: &[f64]) -> Result<bool> {
        let d = self.signed_distance(x)?;
        Ok(d.abs() < self.tube_radius())
    }

    fn require_tube(&self, x: &[f64]) -> Result<f64> {
        let d = self.signed_distance(x)?;
        if d.abs() < self.tube_radius() {
            Ok(d)
        } else {
            domain(format!(
                "point {x:?} (signed distance {d}) lies outside the tube of radius {}",
                self.tube_radius()
            ))
        }
    }

    /// Mean curvature at an interface point, positive for convex `Omega`.
    pub fn mean_curvature(&self, p: &[f64]) -> Result<f64> {
        let fp = self.foot_point(p)?;
        if fp.signed_distance.abs() > ON_INTERFACE_TOL {
            return domain(format!(
                "point {p:?} is {} away from the interface",
                fp.signed_distance.abs()
            ));
        }
        Ok(fp.mean_curvature)
    }

    /// Outward unit normal of the foot point of `x` (for tube points this is
    /// `-grad delta`).
    pub fn outward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_tube(x)?;
        Ok(self.foot_point(x)?.normal)
    }

    /// Laplacian of the signed distance at a tube point.
    pub fn laplacian_signed_distance(&self, x: &[f64]) -> Result<f64> {
        let d = self.require_tube(x)?;
        match *self {
            Shape::Ball { dim, .. } => Ok(-((dim - 1) as f64) / norm(x)),
            Shape::HalfSpace { .. } => Ok(0.0),
            Shape::Ellipse2D { .. } => {
                let k = self.foot_point(x)?.mean_curvature;
                Ok(-k / (1.0 - d * k))
            }
        }
    }

    /// Maximum of `|laplacian delta|` over the closed tube `|delta| <= half_width`.
    pub fn max_abs_laplacian(&self, half_width: f64) -> Result<f64> {
        if !(half_width >= 0.0 && half_width < self.tube_radius()) {
            return domain(format!(
                "tube half-width {half_width} must lie in [0, {})",
                self.tube_radius()
            ));
        }
        Ok(match *self {
            Shape::Ball { dim, radius } => (dim - 1) as f64 / (radius - half_width),
            Shape::HalfSpace { .. } => 0.0,
            // |k/(1 - d k)| grows with k and d; the largest curvature is a/b^2.
            Shape::Ellipse2D { a, b } => {
                let k = a / (b * b);
                k / (1.0 - half_width * k)
            }
        })
    }

    /// Nearest interface point of a tube point.
    pub fn project_to_interface(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_tube(x)?;
        Ok(self.foot_point(x)?.point)
    }

    /// `n` quasi-uniform interface points.
    pub fn interface_samples(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return domain("interface_samples needs n >= 1");
        }
        Ok(match *self {
            Shape::Ball { dim, radius } => sphere_points(dim, n)
                .into_iter()
                .map(|p| p.into_iter().map(|v| v * radius).collect())
                .collect(),
            Shape::HalfSpace { dim } => (0..n)
                .map(|k| {
                    let mut p = vec![0.0; dim];
                    p[0] = k as f64 - 0.5 * (n - 1) as f64;
                    p
                })
                .collect(),
            Shape::Ellipse2D { a, b } => ellipse_arclength_points(a, b, n),
        })
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Curvature of the ellipse at parametric angle `theta`.
pub fn ellipse_curvature(a: f64, b: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    a * b / (a * a * s * s + b * b * c * c).powf(1.5)
}

fn sphere_points(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut p = vec![0.0; dim];
        if dim == 2 {
            let t = 2.0 * PI * k as f64 / n as f64;
            p[0] = t.cos();
            p[1] = t.sin();
        } else {
            // Fibonacci spiral on the 2-sphere spanned by the first three axes.
            let golden = PI * (3.0 - 5f64.sqrt());
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            p[0] = r * t.cos();
            p[1] = r * t.sin();
            p[2] = z;
        }
        out.push(p);
    }
    out
}

fn ellipse_arclength_points(a: f64, b: f64, n: usize) -> Vec<Vec<f64>> {
    const M: usize = 8192;
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let dt = 2.0 * PI / M as f64;
    let mut cum = Vec::with_capacity(M + 1);
    cum.push(0.0);
    for i in 0..M {
        let t0 = i as f64 * dt;
        // Simpson on each panel
        let s = dt / 6.0 * (speed(t0) + 4.0 * speed(t0 + 0.5 * dt) + speed(t0 + dt));
        cum.push(cum[i] + s);
    }
    let total = cum[M];
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while j < M && cum[j + 1] < target {
            j += 1;
        }
        let frac = if cum[j + 1] > cum[j] {
            (target - cum[j]) / (cum[j + 1] - cum[j])
        } else {
            0.0
        };
        let t = (j as f64 + frac) * dt;
        out.push(vec![a * t.cos(), b * t.sin()]);
    }
    out
}

// Foot point on the ellipse. In the first quadrant the stationarity condition
// g(t) = (a^2 - b^2) sin t cos t - X a sin t + Y b cos t = 0 has g(0) >= 0 >=
// g(pi/2). Every sign change on a coarse scan is refined by bracketed Newton
// iteration seeded at atan2(aY, bX); the closest candidate wins.
fn ellipse_foot(a: f64, b: f64, x: &[f64]) -> Result<FootPoint> {
    let (sx, sy) = (x[0].signum(), x[1].signum());
    let (px, py) = (x[0].abs(), x[1].abs());
    let c2 = a * a - b * b;
    let g = |t: f64| {
        let (s, c) = t.sin_cos();
        c2 * s * c - px * a * s + py * b * c
    };
    let dg = |t: f64| {
        let (s, c) = t.sin_cos();
        c2 * (c * c - s * s) - px * a * c - py * b * s
    };
    let scale = (a * a + a * px + b * py).max(1e-300);
    let seed = (a * py).atan2(b * px);

    const SCAN: usize = 64;
    let mut brackets = Vec::new();
    let half_pi = 0.5 * PI;
    let mut t_prev = 0.0;
    let mut g_prev = g(0.0);
    if g_prev == 0.0 {
        brackets.push((0.0, 0.0));
    }
    for i in 1..=SCAN {
        let t = half_pi * i as f64 / SCAN as f64;
        let gt = g(t);
        if gt == 0.0 {
            brackets.push((t, t));
        } else if g_prev > 0.0 && gt < 0.0 || g_prev < 0.0 && gt > 0.0 {
            brackets.push((t_prev, t));
        }
        t_prev = t;
        g_prev = gt;
    }
    if brackets.is_empty() {
        // degenerate: circle or point on an axis where g vanishes identically
        brackets.push((seed, seed));
    }

    let mut best: Option<(f64, f64)> = None;
    for (lo0, hi0) in brackets {
        let theta = if lo0 == hi0 {
            lo0
        } else {
            refine_bracket(&g, &dg, lo0, hi0, seed, scale).map_err(|_| {
                Error::Numeric(format!("ellipse foot-point iteration did not converge at {x:?}"))
            })?
        };
        let (s, c) = theta.sin_cos();
        let d2 = (px - a * c).powi(2) + (py - b * s).powi(2);
        if best.map_or(true, |(_, bd)| d2 < bd) {
            best = Some((theta, d2));
        }
    }
    let (theta, d2) = best.expect("at least one candidate");
    let (s, c) = theta.sin_cos();
    let fx = sx_or_one(sx) * a * c;
    let fy = sx_or_one(sy) * b * s;
    let inside = (x[0] / a).powi(2) + (x[1] / b).powi(2) < 1.0;
    let dist = d2.sqrt();
    let (nx, ny) = (fx / (a * a), fy / (b * b));
    let nn = (nx * nx + ny * ny).sqrt();
    Ok(FootPoint {
        point: vec![fx, fy],
        signed_distance: if inside { dist } else { -dist },
        normal: vec![nx / nn, ny / nn],
        mean_curvature: ellipse_curvature(a, b, theta),
    })
}

fn sx_or_one(s: f64) -> f64 {
    if s < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn refine_bracket(
    g: &dyn Fn(f64) -> f64,
    dg: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    seed: f64,
    scale: f64,
) -> Result<f64> {
    let g_lo_positive = g(lo) > 0.0;
    let mut t = if seed > lo && seed < hi { seed } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let gt = g(t);
        if gt.abs() <= 1e-14 * scale || hi - lo < 1e-15 {
            return Ok(t);
        }
        if (gt > 0.0) == g_lo_positive {
            lo = t;
        } else {
            hi = t;
        }
        let d = dg(t);
        let newton = t - gt / d;
        t = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numeric("foot-point iteration cap reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sample_tube_points(shape: &Shape, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut next = || rng.gen::<f64>();
        let mut pts = Vec::new();
        let tube = shape.tube_radius().min(2.0);
        while pts.len() < n {
            let q = &shape.interface_samples(97).unwrap()[(next() * 97.0) as usize % 97];
            let fp = shape.foot_point(q).unwrap();
            let d = (2.0 * next() - 1.0) * 0.9 * tube;
            let p: Vec<f64> = q.iter().zip(&fp.normal).map(|(qi, ni)| qi - d * ni).collect();
            pts.push(p);
        }
        pts
    }

    #[test]
    fn signed_distance_examples() {
        let ball = Shape::ball(3, 1.0).unwrap();
        assert!((ball.signed_distance(&[0.25, 0.0, 0.0]).unwrap() - 0.75).abs() < 1e-15);
        let hs = Shape::half_space(3).unwrap();
        assert_eq!(hs.signed_distance(&[4.0, -2.0, 0.3]).unwrap(), 0.3);
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        assert!((el.signed_distance(&[3.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((el.signed_distance(&[0.0, 0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(ball.signed_distance(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn mean_curvature_examples() {
        for dim in 2..5 {
            let ball = Shape::ball(dim, 2.0).unwrap();
            for p in ball.interface_samples(5).unwrap() {
                assert!((ball.mean_curvature(&p).unwrap() - 0.5).abs() < 1e-14);
            }
        }
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        assert!((el.mean_curvature(&[2.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((el.mean_curvature(&[0.0, 1.0]).unwrap() - 0.25).abs() < 1e-12);
        let hs = Shape::half_space(2).unwrap();
        assert_eq!(hs.mean_curvature(&[3.0, 0.0]).unwrap(), 0.0);
        assert!(el.mean_curvature(&[1.0, 0.0]).is_err());
    }

    // Curvature from the turning rate of the unit tangent, by finite differences
    // along the parametrization.
    fn turning_curvature(a: f64, b: f64, t: f64) -> f64 {
        let h = 1e-4;
        let tangent = |t: f64| {
            let (dx, dy) = (-a * t.sin(), b * t.cos());
            let n = (dx * dx + dy * dy).sqrt();
            (dx / n, dy / n)
        };
        let angle = |t: f64| {
            let (x, y) = tangent(t);
            y.atan2(x)
        };
        let mut dphi = angle(t + h) - angle(t - h);
        if dphi > PI {
            dphi -= 2.0 * PI;
        } else if dphi < -PI {
            dphi += 2.0 * PI;
        }
        let speed = (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        dphi / (2.0 * h) / speed
    }

    #[test]
    fn ellipse_curvature_matches_tangent_turning() {
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        for p in el.interface_samples(40).unwrap() {
            let t = (2.0 * p[1]).atan2(p[0]);
            let k = el.mean_curvature(&p).unwrap();
            assert!((k - turning_curvature(2.0, 1.0, t)).abs() < 1e-6);
        }
    }

    #[test]
    fn laplacian_examples() {
        let ball = Shape::ball(3, 1.0).unwrap();
        assert!((ball.laplacian_signed_distance(&[0.5, 0.0, 0.0]).unwrap() + 4.0).abs() < 1e-14);
        let hs = Shape::half_space(2).unwrap();
        assert_eq!(hs.laplacian_signed_distance(&[1.0, 7.0]).unwrap(), 0.0);
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        assert!((el.laplacian_signed_distance(&[0.0, 1.0]).unwrap() + 0.25).abs() < 1e-12);
        assert!(el.laplacian_signed_distance(&[0.0, 0.0]).is_err());
        for p in sample_tube_points(&ball, 50, 3) {
            let r = norm(&p);
            assert_eq!(ball.laplacian_signed_distance(&p).unwrap() + 2.0 / r, 0.0);
        }
    }

    // 5-point / 7-point central difference Laplacian of the signed distance.
    fn fd_gradient_and_laplacian(shape: &Shape, x: &[f64], h: f64) -> (f64, f64) {
        let d0 = shape.signed_distance(x).unwrap();
        let mut grad2 = 0.0;
        let mut lap = 0.0;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let (dp, dm) = (shape.signed_distance(&xp).unwrap(), shape.signed_distance(&xm).unwrap());
            grad2 += ((dp - dm) / (2.0 * h)).powi(2);
            lap += (dp - 2.0 * d0 + dm) / (h * h);
        }
        (grad2.sqrt(), lap)
    }

    #[test]
    fn unit_gradient_and_laplacian_in_tube() {
        let shapes = [
            Shape::ball(2, 1.0).unwrap(),
            Shape::ball(3, 1.5).unwrap(),
            Shape::ellipse(2.0, 1.0).unwrap(),
            Shape::half_space(3).unwrap(),
        ];
        for (k, shape) in shapes.iter().enumerate() {
            for p in sample_tube_points(shape, 200, 11 + k as u64) {
                let (g, lap) = fd_gradient_and_laplacian(shape, &p, 1e-4);
                assert!((g - 1.0).abs() < 1e-6, "{shape:?} at {p:?}: |grad| = {g}");
                let exact = shape.laplacian_signed_distance(&p).unwrap();
                assert!((lap - exact).abs() < 1e-3 * (1.0 + exact.abs()), "{shape:?} {p:?}");
            }
        }
    }

    #[test]
    fn projection_examples_and_idempotence() {
        let ball = Shape::ball(2, 1.0).unwrap();
        let q = ball.project_to_interface(&[0.5, 0.0]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-15 && q[1].abs() < 1e-15);
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        let q = el.project_to_interface(&[0.0, 0.7]).unwrap();
        assert!(q[0].abs() < 1e-12 && (q[1] - 1.0).abs() < 1e-12);
        for shape in [ball, el, Shape::half_space(2).unwrap()] {
            for p in sample_tube_points(&shape, 100, 5) {
                let q = shape.project_to_interface(&p).unwrap();
                assert!(shape.signed_distance(&q).unwrap().abs() < 1e-10);
                let q2 = shape.project_to_interface(&q).unwrap();
                assert!(norm(&[q2[0] - q[0], q2[1] - q[1]]) < 1e-10);
            }
        }
        assert!(el.project_to_interface(&[0.1, 0.0]).is_err());
    }

    #[test]
    fn interface_samples_are_uniform_on_circle() {
        let pts = Shape::ball(2, 1.0).unwrap().interface_samples(4).unwrap();
        assert_eq!(pts.len(), 4);
        for i in 0..4 {
            let (p, q) = (&pts[i], &pts[(i + 1) % 4]);
            let angle = (p[0] * q[0] + p[1] * q[1]).clamp(-1.0, 1.0).acos();
            assert!((angle - PI / 2.0).abs() < 1e-12);
        }
        let el = Shape::ellipse(2.0, 1.0).unwrap();
        for p in el.interface_samples(16).unwrap() {
            assert!(el.signed_distance(&p).unwrap().abs() < 1e-12);
        }
        assert!(el.interface_samples(0).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(Shape::ball(1, 1.0).is_err());
        assert!(Shape::ball(3, 0.0).is_err());
        assert!(Shape::ellipse(1.0, 2.0).is_err());
        assert!(Shape::half_space(1).is_err());
        assert_eq!(Shape::ellipse(2.0, 1.0).unwrap().tube_radius(), 0.5);
    }
}
