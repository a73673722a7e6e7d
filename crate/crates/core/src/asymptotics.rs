//! Limit machinery: the small-time and large-lambda curvature functionals,
//! Richardson extrapolation, Laplace-Stieltjes transforms of time traces, the
//! Karamata ratio test and the blow-up profile `S_lambda`.
//!
//! Sign convention: the limits are proportional to `Lap(delta)` on the
//! interface, which is `-(N-1) H` with `H` as returned by
//! [`Shape::mean_curvature`] (positive for convex shapes).

use std::io::{self, Write};

use crate::closedforms::{interface_constant, phi_profile, s_star, Conductivity};
use crate::csvio::format_g17;
use crate::elliptic::ScalarField;
use crate::error::{domain, Result};
use crate::geometry::Shape;
use crate::parabolic::TimeTrace;
use crate::specfun::gamma_fn;

/// Richardson levels used at most; higher ones amplify noise.
pub const MAX_RICHARDSON_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationResult {
    pub limit_estimate: f64,
    pub error_estimate: f64,
    /// `(h, value)` as given.
    pub raw: Vec<(f64, f64)>,
    /// Best extrapolant using the data up to each entry.
    pub extrapolants: Vec<f64>,
    /// Assumed leading correction exponent in `h`.
    pub exponent: f64,
    pub levels: usize,
    /// False when the raw tail is not monotone.
    pub model_consistent: bool,
}

impl ExtrapolationResult {
    pub fn model_descriptor(&self) -> String {
        format!("L + c1 h^{p} + c2 h^(2*{p}) + ... ({} levels)", self.levels, p = self.exponent)
    }

    pub fn relative_error_to(&self, expected: f64) -> f64 {
        ((self.limit_estimate - expected) / expected).abs()
    }

    /// Rows `parameter,value,extrapolant,error` and a
    /// `# limit= expected= rel_err=` footer. `parameters` replaces `h` in the
    /// first column (e.g. lambda or t); pass `None` to print `h`.
    pub fn write_report_csv<W: Write>(&self, mut w: W, parameters: Option<&[f64]>, expected: f64) -> io::Result<()> {
        writeln!(w, "parameter,value,extrapolant,error")?;
        for (i, &(h, v)) in self.raw.iter().enumerate() {
            let p = parameters.and_then(|p| p.get(i).copied()).unwrap_or(h);
            let e = if i == 0 { 0.0 } else { (self.extrapolants[i] - self.extrapolants[i - 1]).abs() };
            writeln!(w, "{},{},{},{}", format_g17(p), format_g17(v), format_g17(self.extrapolants[i]), format_g17(e))?;
        }
        writeln!(
            w,
            "# limit={} expected={} rel_err={}",
            format_g17(self.limit_estimate),
            format_g17(expected),
            format_g17(self.relative_error_to(expected))
        )
    }
}

/// Extrapolates `value(h) -> L` as `h -> 0` under
/// `value(h) = L + c1 h^p + c2 h^(2p) + ...` (Neville's scheme in `x = h^p`,
/// at most [`MAX_RICHARDSON_LEVELS`] levels). The error estimate is the larger
/// of the change between the last two extrapolants and the last correction.
pub fn richardson_extrapolate(seq: &[(f64, f64)], exponent: f64) -> Result<ExtrapolationResult> {
    if seq.len() < 3 {
        return domain(format!("Richardson extrapolation needs at least 3 pairs, got {}", seq.len()));
    }
    if !(exponent > 0.0) {
        return domain("correction exponent must be positive");
    }
    if seq.iter().any(|&(h, v)| !(h > 0.0 && h.is_finite() && v.is_finite())) {
        return domain("Richardson pairs need positive finite h and finite values");
    }
    if seq.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return domain("h must be strictly decreasing");
    }
    let n = seq.len();
    let levels = MAX_RICHARDSON_LEVELS.min(n - 1);
    let x: Vec<f64> = seq.iter().map(|&(h, _)| h.powf(exponent)).collect();
    // t[i][k]: extrapolant from entries i-k..=i
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![seq[i].1];
        for k in 1..=levels.min(i) {
            let prev = row[k - 1];
            let diff = prev - t[i - 1][k - 1];
            row.push(prev + diff / (x[i - k] / x[i] - 1.0));
        }
        t.push(row);
    }
    let extrapolants: Vec<f64> = t.iter().map(|r| *r.last().unwrap()).collect();
    let last = &t[n - 1];
    let limit = last[levels];
    let correction = (last[levels] - last[levels - 1]).abs();
    let change = (extrapolants[n - 1] - extrapolants[n - 2]).abs();
    let tail: Vec<f64> = seq[n - 3..].iter().map(|p| p.1).collect();
    let (d1, d2) = (tail[1] - tail[0], tail[2] - tail[1]);
    let model_consistent = d1 * d2 >= 0.0;
    Ok(ExtrapolationResult {
        limit_estimate: limit,
        error_estimate: correction.max(change),
        raw: seq.to_vec(),
        extrapolants,
        exponent,
        levels,
        model_consistent,
    })
}

/// Coefficients `w` with `limit = sum w_i value_i` for the given `h`; used to
/// propagate per-entry uncertainties through the extrapolation.
pub fn richardson_weights(hs: &[f64], exponent: f64) -> Result<Vec<f64>> {
    let n = hs.len();
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let seq: Vec<(f64, f64)> = hs.iter().enumerate().map(|(j, &h)| (h, if i == j { 1.0 } else { 0.0 })).collect();
        w.push(richardson_extrapolate(&seq, exponent)?.limit_estimate);
    }
    Ok(w)
}

/// Picks from `(parameter, value)` samples (parameter increasing) the entries
/// nearest to `start * factor^k`, `k = 0..count`, in log scale.
pub fn geometric_ladder(samples: &[(f64, f64)], start: f64, factor: f64, count: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(count);
    for k in 0..count {
        let target = start * factor.powi(k as i32);
        let best = samples
            .iter()
            .min_by(|a, b| (a.0 / target).ln().abs().total_cmp(&(b.0 / target).ln().abs()))
            .copied();
        if let Some(b) = best {
            if out.last().map_or(true, |l| b.0 > l.0) {
                out.push(b);
            }
        }
    }
    out
}

/// `sqrt(lambda) (U_lambda(x) - c_inf)` for increasing `lambda`.
pub fn lambda_functional(u_values: &[(f64, f64)], cond: &Conductivity) -> Result<Vec<(f64, f64)>> {
    if u_values.len() < 3 {
        return domain(format!("the lambda functional needs at least 3 entries, got {}", u_values.len()));
    }
    if u_values.iter().any(|&(l, _)| !(l > 0.0)) || u_values.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return domain("lambda must be positive and strictly increasing");
    }
    let c = interface_constant(cond);
    Ok(u_values.iter().map(|&(l, u)| (l, l.sqrt() * (u - c))).collect())
}

/// Extrapolates the lambda functional with `h = lambda^(-1/2)`.
pub fn extrapolate_lambda_functional(values: &[(f64, f64)]) -> Result<ExtrapolationResult> {
    let seq: Vec<(f64, f64)> = values.iter().map(|&(l, v)| (1.0 / l.sqrt(), v)).collect();
    richardson_extrapolate(&seq, 1.0)
}

/// Head model `u(s) - c_inf ~ a + b sqrt(s)` fitted by least squares.
fn fit_sqrt_model(points: &[(f64, f64)], with_constant: bool) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        let x = t.sqrt();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if with_constant && points.len() >= 2 {
        let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        ((sy - b * sx) / n, b)
    } else {
        (0.0, sxy / sxx)
    }
}

/// `int_{t0}^{t1} f` for `f` linear in `sqrt(s)` between the end values;
/// exact for `a + b sqrt(s)`.
fn sqrt_linear_integral(t0: f64, t1: f64, f0: f64, f1: f64) -> f64 {
    let (r0, r1) = (t0.sqrt(), t1.sqrt());
    // int 2 r (f0 + (f1 - f0)(r - r0)/(r1 - r0)) dr
    let slope = (f1 - f0) / (r1 - r0);
    let base = f0 - slope * r0;
    base * (t1 - t0) + slope * 2.0 / 3.0 * (r1 * r1 * r1 - r0 * r0 * r0)
}

/// One sample of the small-time functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFunctionalSample {
    pub t: f64,
    pub value: f64,
    /// Uncertainty of `value` due to the head model.
    pub head_uncertainty: f64,
    /// Propagated trace discretization error (zero without trace errors).
    pub discretization_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFunctional {
    pub samples: Vec<TimeFunctionalSample>,
    /// `int_0^{t0} (u - c_inf) ds` under the model `C sqrt(s)`.
    pub head: f64,
    /// Difference to the head under the model `a + b sqrt(s)`.
    pub head_uncertainty: f64,
    pub head_coefficient: f64,
}

/// Analysis window required above `10 t0`, in decades.
pub const REQUIRED_DECADES: f64 = 1.5;

/// `t^(-3/2) int_0^t (u - c_inf) ds` at every trace time `t >= 10 t0`.
/// The integral uses the trapezoidal rule in `sqrt(s)` on the trace grid; the
/// head below `t0` uses `u - c_inf = C sqrt(s)` fitted over the first decade.
pub fn time_functional(trace: &TimeTrace, cond: &Conductivity) -> Result<TimeFunctional> {
    let (ts, us) = (trace.times(), trace.values());
    let t0 = ts[0];
    let t_max = *ts.last().unwrap();
    let decades = (t_max / (10.0 * t0)).log10();
    if decades < REQUIRED_DECADES {
        return domain(format!(
            "the time functional needs {REQUIRED_DECADES} decades above 10 t0; the trace spans {decades:.2}"
        ));
    }
    let c = interface_constant(cond);
    let head_points: Vec<(f64, f64)> =
        ts.iter().zip(us).take_while(|(t, _)| **t <= 10.0 * t0 * (1.0 + 1e-12)).map(|(&t, &u)| (t, u - c)).collect();
    let (_, b1) = fit_sqrt_model(&head_points, false);
    let (a2, b2) = fit_sqrt_model(&head_points, true);
    let head = 2.0 / 3.0 * b1 * t0.powf(1.5);
    let alt = a2 * t0 + 2.0 / 3.0 * b2 * t0.powf(1.5);
    let head_uncertainty = (head - alt).abs();
    let zeros = vec![0.0; ts.len()];
    let errs = trace.errors().unwrap_or(&zeros);
    let mut integral = head;
    let mut err_integral = errs[0] * t0;
    let mut samples = Vec::new();
    for k in 0..ts.len() {
        if k > 0 {
            integral += sqrt_linear_integral(ts[k - 1], ts[k], us[k - 1] - c, us[k] - c);
            err_integral += sqrt_linear_integral(ts[k - 1], ts[k], errs[k - 1], errs[k]);
        }
        if ts[k] >= 10.0 * t0 * (1.0 - 1e-12) {
            let w = ts[k].powf(-1.5);
            samples.push(TimeFunctionalSample {
                t: ts[k],
                value: integral * w,
                head_uncertainty: head_uncertainty * w,
                discretization_uncertainty: err_integral * w,
            });
        }
    }
    Ok(TimeFunctional { samples, head, head_uncertainty, head_coefficient: b1 })
}

/// Extrapolated small-time limit with its uncertainty budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLimit {
    pub extrapolation: ExtrapolationResult,
    /// Head-model uncertainty propagated through the Richardson weights.
    pub head_uncertainty: f64,
    /// Trace discretization error propagated through the Richardson weights.
    pub discretization_uncertainty: f64,
}

impl TimeLimit {
    pub fn limit(&self) -> f64 {
        self.extrapolation.limit_estimate
    }

    pub fn total_uncertainty(&self) -> f64 {
        self.extrapolation.error_estimate + self.head_uncertainty + self.discretization_uncertainty
    }
}

/// Extrapolated small-time limit of the time functional from a ladder of
/// `count` samples starting at `10 t0` with time ratio `factor`, using
/// `h = sqrt(t)`.
pub fn extrapolate_time_functional(tf: &TimeFunctional, factor: f64, count: usize) -> Result<TimeLimit> {
    if tf.samples.is_empty() {
        return domain("the time functional has no samples");
    }
    let pairs: Vec<(f64, f64)> = tf.samples.iter().map(|s| (s.t, s.value)).collect();
    let mut ladder: Vec<&TimeFunctionalSample> = geometric_ladder(&pairs, pairs[0].0, factor, count)
        .iter()
        .filter_map(|l| tf.samples.iter().find(|s| s.t == l.0))
        .collect();
    ladder.reverse();
    let seq: Vec<(f64, f64)> = ladder.iter().map(|s| (s.t.sqrt(), s.value)).collect();
    let extrapolation = richardson_extrapolate(&seq, 1.0)?;
    let w = richardson_weights(&seq.iter().map(|p| p.0).collect::<Vec<_>>(), 1.0)?;
    let propagate = |f: &dyn Fn(&TimeFunctionalSample) -> f64| -> f64 {
        w.iter().zip(&ladder).map(|(wi, s)| wi.abs() * f(s)).sum()
    };
    Ok(TimeLimit {
        head_uncertainty: propagate(&|s| s.head_uncertainty),
        discretization_uncertainty: propagate(&|s| s.discretization_uncertainty),
        extrapolation,
    })
}

/// Lower incomplete gamma `int_0^x e^{-y} y^{a-1} dy` by its power series.
fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..500 {
        term *= x / (a + n as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum * (a * x.ln() - x).exp()
}

/// `lambda int_{t0}^{t1} e^{-lambda t} f(t) dt` for `f` linear between
/// `(t0, f0)` and `(t1, f1)`.
fn exp_linear_integral(lambda: f64, t0: f64, t1: f64, f0: f64, f1: f64) -> f64 {
    let x = lambda * (t1 - t0);
    let e0 = (-lambda * t0).exp();
    let one_minus = -(-x).exp_m1();
    // (1 - e^{-x})/x - e^{-x}, with a series for small x
    let ramp = if x < 1e-3 {
        x / 2.0 - x * x / 3.0 + x * x * x / 8.0
    } else {
        one_minus / x - (-x).exp()
    };
    e0 * (f0 * one_minus + (f1 - f0) * ramp)
}

fn exp_weighted(lambda: f64, ts: &[f64], fs: &[f64], stride: usize) -> f64 {
    let idx: Vec<usize> = (0..ts.len()).step_by(stride).chain(std::iter::once(ts.len() - 1)).collect();
    let mut sum = 0.0;
    for w in idx.windows(2) {
        if w[1] > w[0] {
            sum += exp_linear_integral(lambda, ts[w[0]], ts[w[1]], fs[w[0]], fs[w[1]]);
        }
    }
    sum
}

/// Second-order product rule, Richardson-corrected against every other node.
fn corrected_exp_weighted(lambda: f64, ts: &[f64], fs: &[f64]) -> f64 {
    let fine = exp_weighted(lambda, ts, fs, 1);
    fine + (fine - exp_weighted(lambda, ts, fs, 2)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub value: f64,
    /// Quadrature, head-model and tail contributions to the uncertainty.
    pub error_estimate: f64,
    pub head: f64,
    pub tail: f64,
}

/// `U_lambda = lambda int_0^inf e^{-lambda t} u(t) dt` from a trace: exact
/// integration of the piecewise-linear trace against the exponential
/// (extrapolated against the same rule on every other node), a head
/// term on `(0, t0)` under `u = a + b sqrt(t)` fitted over the first decade,
/// and the tail `u(t_max) e^{-lambda t_max}`.
pub fn laplace_stieltjes(trace: &TimeTrace, lambda: f64) -> Result<LaplaceEstimate> {
    let (ts, us) = (trace.times(), trace.values());
    let (t0, t_max) = (ts[0], *ts.last().unwrap());
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    if lambda * t0 > 0.1 {
        return domain(format!(
            "lambda t0 = {:.3} exceeds 0.1; the head is unresolved, use t0 <= {:e}",
            lambda * t0,
            0.1 / lambda
        ));
    }
    if lambda * t_max < 30.0 {
        return domain(format!(
            "lambda t_max = {:.3} is below 30; extend the trace to t >= {:e}",
            lambda * t_max,
            30.0 / lambda
        ));
    }
    let head_points: Vec<(f64, f64)> =
        ts.iter().zip(us).take_while(|(t, _)| **t <= 10.0 * t0 * (1.0 + 1e-12)).map(|(&t, &u)| (t, u)).collect();
    let (a, b) = fit_sqrt_model(&head_points, true);
    let g = lower_gamma(1.5, lambda * t0);
    let head = a * -(-lambda * t0).exp_m1() + b * g / lambda.sqrt();
    // alternative head: u constant at u(t0)
    let head_alt = us[0] * -(-lambda * t0).exp_m1();
    let fine = exp_weighted(lambda, ts, us, 1);
    let coarse = exp_weighted(lambda, ts, us, 2);
    let body = corrected_exp_weighted(lambda, ts, us);
    let tail = us[us.len() - 1] * (-lambda * t_max).exp();
    let error_estimate = (fine - coarse).abs() / 3.0 + (head - head_alt).abs() + tail.abs();
    Ok(LaplaceEstimate { value: head + body + tail, error_estimate, head, tail })
}

/// Cumulative values `l(t_k)` of a measure on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrace {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl MeasureTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 3 {
            return domain("a measure trace needs at least three (t, l) samples of equal length");
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("measure times must be positive and strictly increasing");
        }
        Ok(MeasureTrace { times, values })
    }

    /// `l(t) = int_0^t (u - c_inf + K sqrt(s)) ds` from a trace, with the head
    /// below `t0` from the fitted `C sqrt(s)` model.
    pub fn from_trace(trace: &TimeTrace, cond: &Conductivity, k: f64) -> Result<Self> {
        let (ts, us) = (trace.times(), trace.values());
        let c = interface_constant(cond);
        let t0 = ts[0];
        let head_points: Vec<(f64, f64)> =
            ts.iter().zip(us).take_while(|(t, _)| **t <= 10.0 * t0 * (1.0 + 1e-12)).map(|(&t, &u)| (t, u - c)).collect();
        let (_, b) = fit_sqrt_model(&head_points, false);
        let f = |i: usize| us[i] - c + k * ts[i].sqrt();
        let mut l = 2.0 / 3.0 * (b + k) * t0.powf(1.5);
        let mut values = vec![l];
        for i in 1..ts.len() {
            l += sqrt_linear_integral(ts[i - 1], ts[i], f(i - 1), f(i));
            values.push(l);
        }
        Self::new(ts.to_vec(), values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `lambda^alpha int e^{-lambda t} dl = lambda^(alpha+1) int e^{-lambda t} l(t) dt`
    /// with the head on `(0, t0)` modelled as `l(t0) (t/t0)^alpha`.
    pub fn transform(&self, lambda: f64, alpha: f64) -> f64 {
        let (ts, ls) = (&self.times, &self.values);
        let t0 = ts[0];
        let head = ls[0] * t0.powf(-alpha) * lower_gamma(alpha + 1.0, lambda * t0);
        let body = corrected_exp_weighted(lambda, ts, ls);
        let t_max = *ts.last().unwrap();
        let tail = ls[ls.len() - 1] * (-lambda * t_max).exp();
        head + lambda.powf(alpha) * (body + tail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaramataReport {
    pub alpha: f64,
    /// `(lambda, lambda^alpha int e^{-lambda t} dl)`.
    pub transform_sequence: Vec<(f64, f64)>,
    /// `(t, t^-alpha l(t))`.
    pub small_time_sequence: Vec<(f64, f64)>,
    pub transform_limit: ExtrapolationResult,
    pub small_time_limit: ExtrapolationResult,
    /// transform limit / small-time limit; Karamata predicts `Gamma(alpha+1)`.
    pub ratio: f64,
    pub expected_ratio: f64,
    pub ratio_error_estimate: f64,
}

impl KaramataReport {
    pub fn relative_deviation(&self) -> f64 {
        (self.ratio / self.expected_ratio - 1.0).abs()
    }
}

/// Compares the large-lambda limit of `lambda^alpha int e^{-lambda t} dl` with
/// the small-time limit of `t^-alpha l(t)`; their ratio should be
/// `Gamma(alpha + 1)`. Both sequences use ladders of ratio 4 with correction
/// exponent 1 in `sqrt(t)` and `lambda^(-1/2)`.
pub fn karamata_check(measure: &MeasureTrace, alpha: f64) -> Result<KaramataReport> {
    if !(alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let ls = measure.values();
    let scale = ls.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ls.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) || ls[0] < 0.0 {
        return domain("the measure trace decreases; it is not a measure");
    }
    let ts = measure.times();
    let (t0, t_max) = (ts[0], *ts.last().unwrap());
    let small: Vec<(f64, f64)> = ts
        .iter()
        .zip(ls)
        .filter(|(t, _)| **t >= 10.0 * t0 * (1.0 - 1e-12))
        .map(|(&t, &l)| (t, l * t.powf(-alpha)))
        .collect();
    if small.len() < 3 {
        return domain("the measure trace is too short above 10 t0");
    }
    let ladder = geometric_ladder(&small, small[0].0, 4.0, 4);
    let small_seq: Vec<(f64, f64)> = ladder.iter().rev().map(|&(t, v)| (t.sqrt(), v)).collect();
    let small_time_limit = richardson_extrapolate(&small_seq, 1.0)?;
    let lambda_max = 0.1 / t0;
    let mut transform_sequence = Vec::new();
    for k in (0..4).rev() {
        let lambda = lambda_max / 4f64.powi(k);
        if lambda * t_max >= 30.0 {
            transform_sequence.push((lambda, measure.transform(lambda, alpha)));
        }
    }
    if transform_sequence.len() < 3 {
        return domain("the measure trace does not span enough time for three transform samples");
    }
    let tr_seq: Vec<(f64, f64)> = transform_sequence.iter().map(|&(l, v)| (1.0 / l.sqrt(), v)).collect();
    let transform_limit = richardson_extrapolate(&tr_seq, 1.0)?;
    let ratio = transform_limit.limit_estimate / small_time_limit.limit_estimate;
    let ratio_error_estimate = ratio.abs()
        * (transform_limit.error_estimate / transform_limit.limit_estimate.abs()
            + small_time_limit.error_estimate / small_time_limit.limit_estimate.abs());
    Ok(KaramataReport {
        alpha,
        transform_sequence,
        small_time_sequence: ladder,
        transform_limit,
        small_time_limit,
        ratio,
        expected_ratio: gamma_fn(alpha + 1.0)?,
        ratio_error_estimate,
    })
}

/// `Lap(delta)` at an interface point, `-(N-1) H`: the factor multiplying the
/// formula constants in both theorems.
pub fn curvature_term(shape: &Shape, q: &[f64]) -> Result<f64> {
    Ok(-((shape.dim() - 1) as f64) * shape.mean_curvature(q)?)
}

/// Which theorem a limit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// small time, coefficient `parabolic_coeff`
    Time,
    /// large lambda, coefficient `elliptic_coeff`
    Lambda,
}

/// Predicted limit `coeff * Lap(delta)` at an interface point.
pub fn expected_limit(which: Functional, shape: &Shape, q: &[f64], cond: &Conductivity) -> Result<f64> {
    let k = cond.constants();
    let coeff = match which {
        Functional::Time => k.parabolic_coeff,
        Functional::Lambda => k.elliptic_coeff,
    };
    Ok(coeff * curvature_term(shape, q)?)
}

/// Mean curvature `H` (positive for convex shapes) recovered from a limit.
pub fn extract_mean_curvature(which: Functional, limit: f64, dim: usize, cond: &Conductivity) -> Result<f64> {
    if dim < 2 {
        return domain("curvature extraction needs dimension at least 2");
    }
    let k = cond.constants();
    let coeff = match which {
        Functional::Time => k.parabolic_coeff,
        Functional::Lambda => k.elliptic_coeff,
    };
    Ok(-limit / ((dim - 1) as f64 * coeff))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupProfile {
    pub z: Vec<f64>,
    /// `sqrt(lambda) (U(q - z nu / sqrt(lambda)) - Phi(z))`.
    pub s_lambda: Vec<f64>,
    /// `S_*(z)` with the curvature term of `q`.
    pub s_star: Vec<f64>,
    pub curvature_term: f64,
    pub lambda: f64,
}

impl BlowupProfile {
    /// Largest `|S_lambda - S_*|` over `|z| <= z_max`.
    pub fn max_abs_error(&self, z_max: f64) -> f64 {
        self.z
            .iter()
            .zip(self.s_lambda.iter().zip(&self.s_star))
            .filter(|(z, _)| z.abs() <= z_max)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `S_lambda(0)`, linearly interpolated if 0 is not a sample.
    pub fn at_origin(&self) -> f64 {
        crate::elliptic::interp_1d(&self.z, &self.s_lambda, 0.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# lambda={} curvature_term={}", format_g17(self.lambda), format_g17(self.curvature_term))?;
        writeln!(w, "z,s_lambda,s_star")?;
        for i in 0..self.z.len() {
            writeln!(w, "{},{},{}", format_g17(self.z[i]), format_g17(self.s_lambda[i]), format_g17(self.s_star[i]))?;
        }
        Ok(())
    }
}

/// Samples `S_lambda` along the inward normal through the interface point
/// `q` at `samples` points of `|z| <= 8 max sqrt(sigma)`.
pub fn blowup_profile(
    field: &dyn ScalarField,
    shape: &Shape,
    q: &[f64],
    cond: &Conductivity,
    lambda: f64,
    samples: usize,
) -> Result<BlowupProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    if samples < 3 {
        return domain("at least three profile samples are required");
    }
    let window = 8.0 * cond.max().sqrt();
    let reach = window / lambda.sqrt();
    if reach >= shape.tube_radius() {
        let needed = (window / shape.tube_radius()).powi(2);
        return domain(format!(
            "the sampling window {reach:e} leaves the tube of radius {}; use lambda > {needed:e}",
            shape.tube_radius()
        ));
    }
    let kappa = curvature_term(shape, q)?;
    let nu = shape.outward_normal(q)?;
    let mut z = Vec::with_capacity(samples);
    let mut s_lambda = Vec::with_capacity(samples);
    let mut s_ref = Vec::with_capacity(samples);
    for i in 0..samples {
        let zi = -window + 2.0 * window * i as f64 / (samples - 1) as f64;
        let x: Vec<f64> = q.iter().zip(&nu).map(|(qi, ni)| qi - zi / lambda.sqrt() * ni).collect();
        let u = field.value_at(&x)?;
        z.push(zi);
        s_lambda.push(lambda.sqrt() * (u - phi_profile(zi, cond)));
        s_ref.push(s_star(zi, cond, kappa));
    }
    Ok(BlowupProfile { z, s_lambda, s_star: s_ref, curvature_term: kappa, lambda })
}
