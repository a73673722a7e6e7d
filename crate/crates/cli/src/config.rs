//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use curvlab::{Conductivity, Shape};

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "mode",
    "shape",
    "dim",
    "radius",
    "a",
    "b",
    "sigma-plus",
    "sigma-minus",
    "solver",
    "lambda-ladder",
    "time-ratio",
    "finest-factor",
    "n-theta",
    "interface-samples",
    "tolerance",
    "measure",
    "alpha",
    "k",
    "k-headroom",
    "sweep-dims",
    "sweep-sigma-minus",
    "threads",
    "out",
];

/// Keys that do not change results and stay out of the config hash.
const UNHASHED: &[&str] = &["out", "threads"];

pub const DEFAULT_OUT: &str = "curvlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    VerifyElliptic,
    VerifyParabolic,
    EllipseScan,
    BarrierAudit,
    KaramataCheck,
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::VerifyElliptic,
        Mode::VerifyParabolic,
        Mode::EllipseScan,
        Mode::BarrierAudit,
        Mode::KaramataCheck,
        Mode::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::VerifyElliptic => "verify-elliptic",
            Mode::VerifyParabolic => "verify-parabolic",
            Mode::EllipseScan => "ellipse-scan",
            Mode::BarrierAudit => "barrier-audit",
            Mode::KaramataCheck => "karamata-check",
            Mode::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn default_tolerance(self) -> f64 {
        match self {
            Mode::VerifyElliptic | Mode::Sweep => 5e-3,
            Mode::VerifyParabolic => 0.05,
            Mode::EllipseScan => 0.1,
            Mode::BarrierAudit => 0.0,
            Mode::KaramataCheck => 0.01,
        }
    }

    fn default_ladder(self) -> &'static str {
        match self {
            Mode::EllipseScan => "1e3:1.6e4:4x",
            Mode::BarrierAudit => "1e2:1e4:10x",
            _ => "1e2:1e6:10x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Bessel solution for a ball, `Psi_lambda` for a half-space.
    Oracle,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    SqrtT,
    T,
    /// `l(t) = int_0^t (u - c_inf + K sqrt(s)) ds` from a ball run.
    Ell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub shape: Shape,
    pub cond: Conductivity,
    pub solver: Solver,
    pub lambdas: Vec<f64>,
    pub time_ratio: f64,
    pub finest_factor: Option<f64>,
    pub n_theta: usize,
    pub interface_samples: usize,
    pub tolerance: f64,
    pub measure: Option<Measure>,
    pub alpha: Option<f64>,
    pub k: Option<f64>,
    pub k_headroom: f64,
    pub sweep_dims: Vec<usize>,
    pub sweep_sigma_minus: Vec<f64>,
    pub threads: usize,
    pub out: PathBuf,
    /// Resolved `key = value` pairs, defaults included.
    pub echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn hash_input(&self) -> String {
        self.echo
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Every problem found, one per line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl ConfigError {
    fn one(msg: impl Into<String>) -> Self {
        ConfigError { problems: vec![msg.into()] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.problems.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Env,
    Flag,
}

/// Unvalidated entries with where they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut problems = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                problems.push(format!("line {n}: expected `key = value`, got `{body}`"));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                problems.push(format!("line {n}: unknown key `{k}`"));
            } else if let Some((_, Origin::Line(first))) = raw.entries.get(k) {
                problems.push(format!("line {n}: duplicate key `{k}` (first set on line {first})"));
            } else {
                raw.entries.insert(k.to_string(), (v.to_string(), Origin::Line(n)));
            }
        }
        if problems.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigError { problems })
        }
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::one(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Later values win.
    pub fn set(&mut self, key: &str, value: impl Into<String>, origin: Origin) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::one(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.into(), origin));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn validate(&self) -> Result<RunConfig, ConfigError> {
        Resolver { raw: self, problems: Vec::new(), echo: Vec::new() }.run()
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    RawConfig::read(path)?.validate()
}

struct Resolver<'a> {
    raw: &'a RawConfig,
    problems: Vec<String>,
    echo: Vec<(String, String)>,
}

impl Resolver<'_> {
    fn where_(&self, key: &str) -> String {
        match self.raw.entries.get(key).map(|e| e.1) {
            Some(Origin::Line(n)) => format!("line {n}: {key}"),
            Some(Origin::Env) => "CURVLAB_OUT".into(),
            Some(Origin::Flag) => format!("--{key}"),
            None => key.to_string(),
        }
    }

    fn fail(&mut self, key: &str, msg: String) {
        let w = self.where_(key);
        self.problems.push(format!("{w}: {msg}"));
    }

    fn text(&mut self, key: &str, default: &str) -> String {
        let v = self.raw.get(key).unwrap_or(default).to_string();
        self.echo.push((key.to_string(), v.clone()));
        v
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.text(key, &default.to_string());
        match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => x,
            _ => {
                self.fail(key, format!("expected a positive number, got `{v}`"));
                default
            }
        }
    }

    fn optional_positive(&mut self, key: &str) -> Option<f64> {
        self.raw.get(key)?;
        Some(self.positive(key, 1.0))
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        let v = self.text(key, &default.to_string());
        match v.parse::<usize>() {
            Ok(x) if x > 0 => x,
            _ => {
                self.fail(key, format!("expected a positive integer, got `{v}`"));
                default
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, default: &str, ok: impl Fn(&T) -> bool) -> Vec<T> {
        let v = self.text(key, default);
        let parsed: Option<Vec<T>> = v.split(',').map(|s| s.trim().parse::<T>().ok().filter(&ok)).collect();
        match parsed {
            Some(xs) if !xs.is_empty() => xs,
            _ => {
                self.fail(key, format!("expected a comma-separated list of positive values, got `{v}`"));
                Vec::new()
            }
        }
    }

    fn ladder(&mut self, mode: Mode) -> Vec<f64> {
        let v = self.text("lambda-ladder", mode.default_ladder());
        match parse_ladder(&v) {
            Some(l) if l.len() >= 3 => l,
            _ => {
                self.fail(
                    "lambda-ladder",
                    format!("expected `start:end:factorx` or a list of at least 3 increasing values, got `{v}`"),
                );
                Vec::new()
            }
        }
    }

    fn run(mut self) -> Result<RunConfig, ConfigError> {
        let mode = match self.raw.get("mode") {
            None => return Err(ConfigError::one("missing required key `mode`")),
            Some(m) => match Mode::parse(m) {
                Some(m) => m,
                None => {
                    let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                    return Err(ConfigError::one(format!(
                        "{}: unknown mode `{m}` (expected one of {})",
                        self.where_("mode"),
                        names.join(", ")
                    )));
                }
            },
        };
        self.echo.push(("mode".into(), mode.name().into()));

        let default_shape = if mode == Mode::EllipseScan { "ellipse" } else { "ball" };
        let shape_name = self.text("shape", default_shape);
        let shape = match shape_name.as_str() {
            "ball" => {
                let dim = self.count("dim", 3);
                let r = self.positive("radius", 1.0);
                Shape::ball(dim, r).map_err(|e| e.to_string())
            }
            "ellipse" => {
                let a = self.positive("a", 2.0);
                let b = self.positive("b", 1.0);
                Shape::ellipse(a, b).map_err(|e| e.to_string())
            }
            "half-space" => {
                let dim = self.count("dim", 3);
                Shape::half_space(dim).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown shape `{other}` (expected ball, ellipse or half-space)")),
        };
        let shape = match shape {
            Ok(s) => Some(s),
            Err(e) => {
                self.fail("shape", e);
                None
            }
        };
        if let Some(s) = &shape {
            let ok = match mode {
                Mode::EllipseScan => matches!(s, Shape::Ellipse2D { .. }),
                Mode::KaramataCheck => true,
                _ => !matches!(s, Shape::Ellipse2D { .. }),
            };
            if !ok {
                self.fail("shape", format!("{} does not support shape `{shape_name}`", mode.name()));
            }
        }

        let sp = self.positive("sigma-plus", 1.0);
        let sm = self.positive("sigma-minus", 4.0);
        let cond = Conductivity::new(sp, sm).ok();

        let solver = match self.text("solver", "oracle").as_str() {
            "oracle" => Solver::Oracle,
            "fd" => Solver::Fd,
            other => {
                self.fail("solver", format!("expected oracle or fd, got `{other}`"));
                Solver::Oracle
            }
        };
        let lambdas = self.ladder(mode);
        let time_ratio = self.positive("time-ratio", 1.15);
        if time_ratio <= 1.0 {
            self.fail("time-ratio", "must exceed 1".into());
        }
        let finest_factor = self.optional_positive("finest-factor");
        let n_theta = self.count("n-theta", 1024);
        let interface_samples = self.count("interface-samples", 16);
        let tolerance = if mode == Mode::BarrierAudit {
            0.0
        } else {
            self.positive("tolerance", mode.default_tolerance())
        };

        let measure = match self.raw.get("measure") {
            None => {
                if mode == Mode::KaramataCheck {
                    self.problems.push("measure: required by karamata-check (sqrt_t, t or ell)".into());
                }
                None
            }
            Some(_) => match self.text("measure", "").as_str() {
                "sqrt_t" => Some(Measure::SqrtT),
                "t" => Some(Measure::T),
                "ell" => Some(Measure::Ell),
                other => {
                    self.fail("measure", format!("expected sqrt_t, t or ell, got `{other}`"));
                    None
                }
            },
        };
        if measure == Some(Measure::Ell) && !matches!(shape, Some(Shape::Ball { .. })) {
            self.fail("measure", "ell needs a ball".into());
        }
        let alpha = self.optional_positive("alpha");
        let k = match self.raw.get("k") {
            None => None,
            Some(_) => {
                let v = self.text("k", "");
                match v.parse::<f64>() {
                    Ok(x) if x >= 0.0 && x.is_finite() => Some(x),
                    _ => {
                        self.fail("k", format!("expected a non-negative number, got `{v}`"));
                        None
                    }
                }
            }
        };
        let k_headroom = self.positive("k-headroom", 2.0);
        if k_headroom < 1.0 {
            self.fail("k-headroom", "must be at least 1".into());
        }
        let sweep_dims = self.list::<usize>("sweep-dims", "2,3", |d| (2..=3).contains(d));
        let sweep_sigma_minus = self.list::<f64>("sweep-sigma-minus", "0.25,1,4", |s| *s > 0.0 && s.is_finite());
        let threads = self.count("threads", 1);
        let out = PathBuf::from(self.text("out", DEFAULT_OUT));

        if !self.problems.is_empty() {
            return Err(ConfigError { problems: self.problems });
        }
        Ok(RunConfig {
            mode,
            shape: shape.expect("checked"),
            cond: cond.expect("checked"),
            solver,
            lambdas,
            time_ratio,
            finest_factor,
            n_theta,
            interface_samples,
            tolerance,
            measure,
            alpha,
            k,
            k_headroom,
            sweep_dims,
            sweep_sigma_minus,
            threads,
            out,
            echo: self.echo,
        })
    }
}

/// `start:end:factorx` (e.g. `1e2:1e6:10x`) or `v1,v2,...`.
pub fn parse_ladder(s: &str) -> Option<Vec<f64>> {
    let out: Vec<f64> = if let Some((range, factor)) = s.rsplit_once(':') {
        let (start, end) = range.split_once(':')?;
        let start: f64 = start.trim().parse().ok()?;
        let end: f64 = end.trim().parse().ok()?;
        let factor: f64 = factor.trim().strip_suffix('x')?.parse().ok()?;
        if !(start > 0.0 && end >= start && factor > 1.0 && end.is_finite()) {
            return None;
        }
        let mut v = Vec::new();
        let mut k = 0;
        loop {
            let l = start * factor.powi(k);
            if l > end * (1.0 + 1e-9) {
                break;
            }
            v.push(l);
            k += 1;
        }
        v
    } else {
        s.split(',').map(|x| x.trim().parse().ok()).collect::<Option<Vec<f64>>>()?
    };
    let ok = out.iter().all(|l| *l > 0.0 && l.is_finite()) && out.windows(2).all(|w| w[1] > w[0]);
    ok.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_forms() {
        assert_eq!(parse_ladder("1e2:1e6:10x").unwrap(), vec![1e2, 1e3, 1e4, 1e5, 1e6]);
        assert_eq!(parse_ladder("1e3:1.6e4:4x").unwrap(), vec![1e3, 4e3, 1.6e4]);
        assert_eq!(parse_ladder("1, 2,5").unwrap(), vec![1.0, 2.0, 5.0]);
        assert!(parse_ladder("1e2:1e6:10").is_none());
        assert!(parse_ladder("3,2,1").is_none());
    }

    #[test]
    fn duplicate_and_unknown_keys_are_all_reported() {
        let err = RawConfig::parse("mode = sweep\n# comment\nfoo = 1\nmode = sweep\n").unwrap_err();
        assert_eq!(err.problems.len(), 2);
        assert!(err.problems[0].contains("line 3") && err.problems[0].contains("`foo`"));
        assert!(err.problems[1].contains("line 4") && err.problems[1].contains("duplicate key `mode`"));
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = RawConfig::parse("mode = verify-elliptic").unwrap().validate().unwrap();
        assert_eq!(cfg.shape, Shape::ball(3, 1.0).unwrap());
        assert_eq!(cfg.lambdas.len(), 5);
        assert_eq!(cfg.tolerance, 5e-3);
        assert!(cfg.echo.iter().any(|(k, v)| k == "sigma-minus" && v == "4"));
    }

    #[test]
    fn every_invalid_field_is_listed() {
        let err = RawConfig::parse("mode = verify-elliptic\nsigma-plus = -1\nradius = x\nsolver = magic")
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(err.problems.len(), 3, "{err}");
        assert!(err.problems[0].starts_with("line 3: radius"));
    }

    #[test]
    fn mode_is_required() {
        let err = RawConfig::parse("shape = ball").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("mode"));
    }
}
