//! Experiment drivers behind the CLI: each takes a parsed [`RunConfig`] and an
//! output directory, writes CSV/JSON artifacts plus the resolved config echo,
//! and returns a pass/fail [`Outcome`].
//!
//! Exit-code contract: pass → 0, tolerance failure → 1 (an `Outcome` with
//! `pass = false`), configuration/runtime error → 2 (an `ExperimentError`).

use crate::config::{ConfigError, RunConfig};
use crate::dynamics::DynamicsError;
use crate::energy_models::EnergyError;
use crate::oracle::OracleError;
use crate::relative_energy::RelEnergyError;
use crate::torus_field::{snapshot::SnapshotError, FieldError};
use std::path::Path;
use thiserror::Error;

pub mod common;
pub mod convergence;
pub mod convexity;
pub mod identity;
pub mod noether;
pub mod simulate;
pub mod twin;
pub mod variational;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    RelEnergy(#[from] RelEnergyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// What a command reports back: a verdict plus human-readable summary lines
/// (also written to `report.txt` in the artifact directory).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn passing() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn check(&mut self, ok: bool, line: impl Into<String>) {
        let tag = if ok { "[pass]" } else { "[FAIL]" };
        self.lines.push(format!("{tag} {}", line.into()));
        self.pass &= ok;
    }
}

/// Dispatch a parsed config to its experiment driver.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    use crate::config::ExperimentName::*;
    common::prepare_dir(cfg, out_dir)?;
    let outcome = match cfg.experiment.name {
        Simulate => simulate::run(cfg, out_dir)?,
        VerifyNoether => noether::run(cfg, out_dir)?,
        VerifyIdentity => identity::run(cfg, out_dir)?,
        TwinStability => twin::run(cfg, out_dir)?,
        ModelConvergence => convergence::run(cfg, out_dir)?,
        CheckConvexity => convexity::run(cfg, out_dir)?,
        CheckVariational => variational::run(cfg, out_dir)?,
    };
    common::write_text(&out_dir.join("report.txt"), &(outcome.lines.join("\n") + "\n"))?;
    Ok(outcome)
}
