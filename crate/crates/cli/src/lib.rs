//! Batch front end for curvlab verification runs.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 usage or config
//! error, 3 numeric failure.

pub mod config;
pub mod modes;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, Mode, Origin, RawConfig, RunConfig};
pub use report::{Outputs, Report, RunError};

#[derive(Parser)]
#[command(name = "curvlab", version, about = "Curvature asymptotics verification runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the large-lambda limit on a ball or half-space.
    VerifyElliptic(Flags),
    /// Extract the small-time limit on a ball or half-space.
    VerifyParabolic(Flags),
    /// Pointwise curvature along an ellipse from confocal solves.
    EllipseScan(Flags),
    /// Barrier sandwiches with calibrated K and with K = 0.
    BarrierAudit(Flags),
    /// Ratio test of the Karamata Tauberian theorem.
    KaramataCheck(Flags),
    /// verify-elliptic over a grid of dimensions and conductivities.
    Sweep(Flags),
    /// Run the mode named in the config file.
    Run(Flags),
}

/// Every flag overrides the config key of the same name.
#[derive(Args, Default)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ball, ellipse or half-space.
    #[arg(long, allow_hyphen_values = true)]
    shape: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dim: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<String>,
    /// Ellipse semi-axis along x.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Ellipse semi-axis along y.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma_plus: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma_minus: Option<String>,
    /// oracle or fd.
    #[arg(long, allow_hyphen_values = true)]
    solver: Option<String>,
    /// `start:end:factorx` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    lambda_ladder: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    time_ratio: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    finest_factor: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n_theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    interface_samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tolerance: Option<String>,
    /// sqrt_t, t or ell.
    #[arg(long, allow_hyphen_values = true)]
    measure: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Barrier constant; calibrated when absent.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k_headroom: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sweep_dims: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sweep_sigma_minus: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    threads: Option<String>,
    /// Output directory (overrides CURVLAB_OUT).
    #[arg(long, allow_hyphen_values = true)]
    out: Option<String>,
}

impl Flags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 22] {
        [
            ("shape", &self.shape),
            ("dim", &self.dim),
            ("radius", &self.radius),
            ("a", &self.a),
            ("b", &self.b),
            ("sigma-plus", &self.sigma_plus),
            ("sigma-minus", &self.sigma_minus),
            ("solver", &self.solver),
            ("lambda-ladder", &self.lambda_ladder),
            ("time-ratio", &self.time_ratio),
            ("finest-factor", &self.finest_factor),
            ("n-theta", &self.n_theta),
            ("interface-samples", &self.interface_samples),
            ("tolerance", &self.tolerance),
            ("measure", &self.measure),
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("k-headroom", &self.k_headroom),
            ("sweep-dims", &self.sweep_dims),
            ("sweep-sigma-minus", &self.sweep_sigma_minus),
            ("threads", &self.threads),
            ("out", &self.out),
        ]
    }
}

fn execute(command: Command) -> Result<bool, RunError> {
    let (mode, flags) = match command {
        Command::VerifyElliptic(f) => (Some(Mode::VerifyElliptic), f),
        Command::VerifyParabolic(f) => (Some(Mode::VerifyParabolic), f),
        Command::EllipseScan(f) => (Some(Mode::EllipseScan), f),
        Command::BarrierAudit(f) => (Some(Mode::BarrierAudit), f),
        Command::KaramataCheck(f) => (Some(Mode::KaramataCheck), f),
        Command::Sweep(f) => (Some(Mode::Sweep), f),
        Command::Run(f) => (None, f),
    };
    let mut raw = match &flags.config {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    if let Some(m) = mode {
        raw.set("mode", m.name(), Origin::Flag)?;
    }
    if let Ok(dir) = std::env::var("CURVLAB_OUT") {
        raw.set("out", dir, Origin::Env)?;
    }
    for (key, value) in flags.pairs() {
        if let Some(v) = value {
            raw.set(key, v.clone(), Origin::Flag)?;
        }
    }
    let cfg = raw.validate()?;
    let out = Outputs::create(&cfg.out)?;
    let report = modes::run_mode(&cfg, &out)?;
    let text = out.append_summary(&cfg, &report)?;
    print!("{text}");
    Ok(report.passed())
}

pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("curvlab: {e}");
            e.exit_code()
        }
    }
}
