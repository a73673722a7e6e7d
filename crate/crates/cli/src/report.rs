use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error:\n{0}")]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("numeric failure: {0}")]
    Numeric(#[from] curvlab::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// Result of one mode run.
#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Informational lines (solver warnings, extracted values).
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }
}

/// One run directory.
pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()
    }

    /// Appends the run's block to `summary.txt` and returns it.
    pub fn append_summary(&self, cfg: &RunConfig, report: &Report) -> io::Result<String> {
        let text = summary_text(cfg, report);
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join("summary.txt"))?;
        f.write_all(text.as_bytes())?;
        Ok(text)
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.hash_input().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn summary_text(cfg: &RunConfig, report: &Report) -> String {
    let mut s = format!("== curvlab {}\nconfig_sha256 = {}\n", cfg.mode.name(), config_hash(cfg));
    for (k, v) in &cfg.echo {
        s += &format!("config {k} = {v}\n");
    }
    for n in &report.notes {
        s += &format!("note {n}\n");
    }
    for c in &report.checks {
        s += &format!("check {} {} {}\n", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    s += &format!(
        "result = {} ({passed}/{} checks passed)\n",
        if report.passed() { "PASS" } else { "FAIL" },
        report.checks.len()
    );
    s
}
