//! Checks of the barrier sandwiches (parabolic and elliptic), the maximum
//! principle, and the calibrated barrier constant `K`.

use std::fmt;
use std::io::{self, Write};

use crate::closedforms::{psi, psi_lambda, Conductivity};
use crate::csvio::format_g17;
use crate::elliptic::{Field, FieldParameter, ScalarField};
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::parabolic::TimeTrace;

/// Default tube half-width as a fraction of the shape's tube radius.
pub const DEFAULT_TUBE_FRACTION: f64 = 0.5;
/// Default factor between `K_cal` and the computable part `K_1`.
pub const DEFAULT_HEADROOM: f64 = 2.0;
/// Discretization slack multiplier applied to error estimates.
pub const SLACK_FACTOR: f64 = 3.0;
/// Added to every slack: the linear solver tolerance accumulated over a run.
pub const SLACK_FLOOR: f64 = 1e-10;
/// Tolerance of the maximum-principle check.
pub const RANGE_TOL: f64 = 1e-12;

/// `K_1 = (4 s+ s- / S) max|Lap(delta)| f'(0)` over the tube of the given
/// half-width, `f'(0) = 1/(2 sqrt(pi))`.
pub fn k_one(shape: &Shape, cond: &Conductivity, half_width: f64) -> Result<f64> {
    let lap = match shape {
        Shape::HalfSpace { .. } => 0.0,
        _ => shape.max_abs_laplacian(half_width)?,
    };
    let (p, m) = (cond.sigma_plus().sqrt(), cond.sigma_minus().sqrt());
    Ok(4.0 * p * m / (p + m) * lap / (2.0 * std::f64::consts::PI.sqrt()))
}

/// `K_cal = headroom * K_1` for a tube of the given half-width.
pub fn calibrate_k_with(shape: &Shape, cond: &Conductivity, half_width: f64, headroom: f64) -> Result<f64> {
    if !(headroom >= 1.0) {
        return domain(format!("headroom must be at least 1, got {headroom}"));
    }
    Ok(headroom * k_one(shape, cond, half_width)?)
}

/// `K_cal` with the default tube (half the tube radius) and headroom 2.
pub fn calibrate_k(shape: &Shape, cond: &Conductivity) -> Result<f64> {
    calibrate_k_with(shape, cond, default_half_width(shape), DEFAULT_HEADROOM)
}

pub fn default_half_width(shape: &Shape) -> f64 {
    DEFAULT_TUBE_FRACTION * shape.tube_radius()
}

/// Where the largest violation (or the tightest sample) occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub parameter: FieldParameter,
    pub value: f64,
    /// `psi` or `Psi_lambda` at the witness.
    pub barrier_center: f64,
    pub bound: f64,
    pub slack: f64,
}

pub const BARRIER_CSV_HEADER: &str =
    "lemma,k,samples,max_violation,passed,witness_point,witness_parameter,witness_value,witness_center,witness_bound";

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub lemma: &'static str,
    pub k: f64,
    pub samples: usize,
    /// `max(|u - center| - bound - slack)`; the check passes iff `<= 0`.
    pub max_violation: f64,
    pub witness: Option<Witness>,
}

impl BarrierReport {
    fn new(lemma: &'static str, k: f64) -> Self {
        BarrierReport { lemma, k, samples: 0, max_violation: f64::NEG_INFINITY, witness: None }
    }

    pub fn passed(&self) -> bool {
        self.samples > 0 && self.max_violation <= 0.0
    }

    fn record(&mut self, w: Witness) {
        self.samples += 1;
        let v = (w.value - w.barrier_center).abs() - w.bound - w.slack;
        if v > self.max_violation {
            self.max_violation = v;
            self.witness = Some(w);
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{BARRIER_CSV_HEADER}")?;
        self.write_csv_row(w)
    }

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (point, param, value, center, bound) = match &self.witness {
            Some(x) => (
                x.point.iter().map(|&c| format_g17(c)).collect::<Vec<_>>().join(";"),
                parameter_label(x.parameter),
                format_g17(x.value),
                format_g17(x.barrier_center),
                format_g17(x.bound),
            ),
            None => Default::default(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{point},{param},{value},{center},{bound}",
            self.lemma,
            format_g17(self.k),
            self.samples,
            format_g17(self.max_violation),
            self.passed()
        )
    }
}

fn parameter_label(p: FieldParameter) -> String {
    match p {
        FieldParameter::Lambda(l) => format!("lambda={}", format_g17(l)),
        FieldParameter::Time(t) => format!("t={}", format_g17(t)),
    }
}

impl fmt::Display for BarrierReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} K={:.6} samples={} max_violation={:.3e} {}",
            self.lemma,
            self.k,
            self.samples,
            self.max_violation,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        if let Some(w) = &self.witness {
            write!(f, " witness x={:?} {} u={:.6} center={:.6}", w.point, parameter_label(w.parameter), w.value, w.barrier_center)?;
        }
        Ok(())
    }
}

fn in_tube(shape: &Shape, x: &[f64], half_width: f64) -> bool {
    match shape.signed_distance(x) {
        Ok(d) => d.abs() <= half_width,
        Err(_) => false,
    }
}

/// Lemma 4.1: `psi - K sqrt(t) <= u <= psi + K sqrt(t)` at every tube node
/// of the snapshots and every trace sample. Slack is three times the
/// snapshot's or trace sample's error estimate.
pub fn barrier_check_parabolic(
    traces: &[TimeTrace],
    snapshots: &[Field],
    shape: &Shape,
    cond: &Conductivity,
    k: f64,
) -> Result<BarrierReport> {
    let hw = default_half_width(shape);
    let mut report = BarrierReport::new("lemma4.1", k);
    for tr in traces {
        if !in_tube(shape, tr.point(), hw) {
            continue;
        }
        for (i, (&t, &u)) in tr.times().iter().zip(tr.values()).enumerate() {
            let slack = SLACK_FACTOR * tr.errors().map_or(0.0, |e| e[i]) + SLACK_FLOOR;
            report.record(Witness {
                point: tr.point().to_vec(),
                parameter: FieldParameter::Time(t),
                value: u,
                barrier_center: psi(tr.point(), t, shape, cond)?,
                bound: k * t.sqrt(),
                slack,
            });
        }
    }
    for f in snapshots {
        let t = match f.parameter() {
            FieldParameter::Time(t) => t,
            FieldParameter::Lambda(_) => return domain("parabolic barrier check got an elliptic field"),
        };
        let slack = SLACK_FACTOR * f.error_estimate() + SLACK_FLOOR;
        for (x, u) in f.samples() {
            if in_tube(shape, &x, hw) {
                let center = psi(&x, t, shape, cond)?;
                report.record(Witness { point: x, parameter: FieldParameter::Time(t), value: u, barrier_center: center, bound: k * t.sqrt(), slack });
            }
        }
    }
    Ok(report)
}

/// Lemma 5.1 on a discrete field: `|U - Psi_lambda| <= sqrt(pi) K / (2 sqrt(lambda))`
/// at every tube node, with slack three times the field's error estimate.
pub fn barrier_check_elliptic(field: &Field, shape: &Shape, cond: &Conductivity, k: f64) -> Result<BarrierReport> {
    let lambda = match field.parameter() {
        FieldParameter::Lambda(l) => l,
        FieldParameter::Time(_) => return domain("elliptic barrier check got a parabolic field"),
    };
    let slack = SLACK_FACTOR * field.error_estimate() + SLACK_FLOOR;
    let samples = field.samples();
    let points: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    check_elliptic(&points, &values, shape, cond, k, lambda, slack)
}

/// Lemma 5.1 for any field (e.g. the Bessel solution) at the given points.
pub fn barrier_check_elliptic_at(
    field: &dyn ScalarField,
    points: &[Vec<f64>],
    shape: &Shape,
    cond: &Conductivity,
    k: f64,
    lambda: f64,
    slack: f64,
) -> Result<BarrierReport> {
    let values = points.iter().map(|x| field.value_at(x)).collect::<Result<Vec<_>>>()?;
    check_elliptic(points, &values, shape, cond, k, lambda, slack)
}

fn check_elliptic(
    points: &[Vec<f64>],
    values: &[f64],
    shape: &Shape,
    cond: &Conductivity,
    k: f64,
    lambda: f64,
    slack: f64,
) -> Result<BarrierReport> {
    let hw = default_half_width(shape);
    let bound = std::f64::consts::PI.sqrt() * k / (2.0 * lambda.sqrt());
    let mut report = BarrierReport::new("lemma5.1", k);
    for (x, &u) in points.iter().zip(values) {
        if in_tube(shape, x, hw) {
            report.record(Witness {
                point: x.clone(),
                parameter: FieldParameter::Lambda(lambda),
                value: u,
                barrier_center: psi_lambda(x, lambda, shape, cond)?,
                bound,
                slack,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub min_at: Vec<f64>,
    pub max_at: Vec<f64>,
    /// Some sample sits exactly on 0 or 1 (allowed, e.g. for `chi_Omega`).
    pub touches_bounds: bool,
}

impl RangeReport {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.min >= -RANGE_TOL && self.max <= 1.0 + RANGE_TOL
    }
}

impl fmt::Display for RangeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max-principle samples={} min={:.17e} at {:?} max={:.17e} at {:?} {}",
            self.samples,
            self.min,
            self.min_at,
            self.max,
            self.max_at,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// `[0, 1]` check up to [`RANGE_TOL`] over `(point, value)` samples.
pub fn maximum_principle_check(samples: &[(Vec<f64>, f64)]) -> RangeReport {
    let mut r = RangeReport {
        samples: samples.len(),
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        min_at: Vec::new(),
        max_at: Vec::new(),
        touches_bounds: false,
    };
    for (x, v) in samples {
        // NaN fails the check through min/max
        if !(*v >= r.min) {
            r.min = *v;
            r.min_at = x.clone();
        }
        if !(*v <= r.max) {
            r.max = *v;
            r.max_at = x.clone();
        }
        r.touches_bounds |= *v == 0.0 || *v == 1.0;
    }
    r
}

pub fn maximum_principle_field(field: &Field) -> RangeReport {
    maximum_principle_check(&field.samples())
}

/// Trace samples are reported at `(point..., t)`.
pub fn maximum_principle_trace(trace: &TimeTrace) -> RangeReport {
    let samples: Vec<(Vec<f64>, f64)> = trace
        .times()
        .iter()
        .zip(trace.values())
        .map(|(&t, &u)| {
            let mut p = trace.point().to_vec();
            p.push(t);
            (p, u)
        })
        .collect();
    maximum_principle_check(&samples)
}
