//! JSON run configuration: strict parsing (unknown keys rejected at every
//! level), full validation before any allocation, and an echo of the resolved
//! config into each artifact directory.

use crate::dynamics::{ForceForm, Integrator, SystemKind, SystemSpec};
use crate::energy_models::{Band, Capillarity, EnergyModel, LocalEnergy, ModelKind};
use crate::torus_field::TorusGrid;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_true() -> bool {
    true
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::new(self.dim, self.n, self.length, self.dealias)
            .map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_force_form")]
    pub force_form: ForceForm,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
    #[serde(default = "default_true")]
    pub enforce_cfl: bool,
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}
fn default_force_form() -> ForceForm {
    ForceForm::Conservative
}
fn default_cfl() -> f64 {
    0.3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Korteweg,
    Qhd,
    EulerPoisson,
    LowerOrder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalEnergyConfig {
    pub kind: LocalEnergyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalEnergyKind {
    GammaLaw,
    DoubleWell,
    Linear,
}

impl LocalEnergyConfig {
    pub fn build(&self) -> Result<LocalEnergy> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| invalid(format!("h: '{name}' required for {:?}", self.kind)))
        };
        let forbid = |v: Option<f64>, name: &str| {
            if v.is_some() {
                Err(invalid(format!("h: '{name}' not a parameter of {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        let local = match self.kind {
            LocalEnergyKind::GammaLaw => {
                forbid(self.a, "a")?;
                forbid(self.b, "b")?;
                forbid(self.c0, "c0")?;
                LocalEnergy::GammaLaw { k: need(self.k, "k")?, gamma: need(self.gamma, "gamma")? }
            }
            LocalEnergyKind::DoubleWell => {
                forbid(self.k, "k")?;
                forbid(self.gamma, "gamma")?;
                LocalEnergy::DoubleWell {
                    a: need(self.a, "a")?,
                    b: need(self.b, "b")?,
                    c0: self.c0.unwrap_or(0.0),
                }
            }
            LocalEnergyKind::Linear => {
                forbid(self.k, "k")?;
                forbid(self.gamma, "gamma")?;
                forbid(self.b, "b")?;
                forbid(self.c0, "c0")?;
                LocalEnergy::Linear { a: need(self.a, "a")? }
            }
        };
        local.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(local)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapillarityConfig {
    pub kind: CapillarityKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapillarityKind {
    Constant,
    Qhd,
    Quadratic,
    ShiftedPower,
}

impl CapillarityConfig {
    pub fn build(&self) -> Result<Capillarity> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| invalid(format!("kappa: '{name}' required for {:?}", self.kind)))
        };
        Ok(match self.kind {
            CapillarityKind::Constant => Capillarity::Constant { c: need(self.c, "c")? },
            CapillarityKind::Qhd => Capillarity::Qhd { eps: need(self.eps, "eps")? },
            CapillarityKind::Quadratic => {
                Capillarity::Quadratic { a0: need(self.a0, "a0")?, a2: need(self.a2, "a2")? }
            }
            CapillarityKind::ShiftedPower => Capillarity::ShiftedPower {
                c0: need(self.c0, "c0")?,
                a: need(self.a, "a")?,
                b: need(self.b, "b")?,
                s: need(self.s, "s")?,
            },
        })
    }
}

/// The model block: {type, h:{kind, …}, kappa:{…}?, beta?, alpha?, epsilon?,
/// c_kappa?, band?}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub model_type: ModelType,
    pub h: LocalEnergyConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<CapillarityConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<EnergyModel> {
        let local = self.h.build()?;
        let band = self.band.unwrap_or_default();
        let forbid = |present: bool, name: &str| {
            if present {
                Err(invalid(format!("model: '{name}' not a parameter of {:?}", self.model_type)))
            } else {
                Ok(())
            }
        };
        let kind = match self.model_type {
            ModelType::Korteweg => {
                forbid(self.beta.is_some(), "beta")?;
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.epsilon.is_some(), "epsilon")?;
                forbid(self.c_kappa.is_some(), "c_kappa")?;
                let cap = self
                    .kappa
                    .as_ref()
                    .ok_or_else(|| invalid("model: korteweg requires 'kappa'"))?
                    .build()?;
                ModelKind::Korteweg { local, cap }
            }
            ModelType::Qhd => {
                forbid(self.kappa.is_some(), "kappa")?;
                forbid(self.beta.is_some(), "beta")?;
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.c_kappa.is_some(), "c_kappa")?;
                ModelKind::Qhd {
                    local,
                    epsilon: self.epsilon.ok_or_else(|| invalid("model: qhd requires 'epsilon'"))?,
                }
            }
            ModelType::EulerPoisson => {
                forbid(self.kappa.is_some(), "kappa")?;
                forbid(self.alpha.is_some(), "alpha")?;
                forbid(self.epsilon.is_some(), "epsilon")?;
                forbid(self.c_kappa.is_some(), "c_kappa")?;
                ModelKind::EulerPoisson {
                    local,
                    beta: self.beta.ok_or_else(|| invalid("model: euler_poisson requires 'beta'"))?,
                }
            }
            ModelType::LowerOrder => {
                forbid(self.kappa.is_some(), "kappa")?;
                forbid(self.beta.is_some(), "beta")?;
                forbid(self.epsilon.is_some(), "epsilon")?;
                ModelKind::LowerOrder {
                    local,
                    c_kappa: self
                        .c_kappa
                        .ok_or_else(|| invalid("model: lower_order requires 'c_kappa'"))?,
                    alpha: self
                        .alpha
                        .ok_or_else(|| invalid("model: lower_order requires 'alpha'"))?,
                }
            }
        };
        EnergyModel::new(kind, band).map_err(|e| invalid(e.to_string()))
    }
}

/// One sinusoidal wave added to an initial field:
/// amplitude · sin(2π·mode·x_axis / L + phase).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wave {
    pub amplitude: f64,
    pub mode: i64,
    #[serde(default)]
    pub phase: f64,
    /// Coordinate axis the wave varies along.
    #[serde(default)]
    pub axis: usize,
    /// Velocity component the wave feeds (u-waves only).
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub rho_base: f64,
    #[serde(default)]
    pub rho_waves: Vec<Wave>,
    #[serde(default)]
    pub u_waves: Vec<Wave>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Simulate,
    VerifyNoether,
    VerifyIdentity,
    TwinStability,
    ModelConvergence,
    CheckConvexity,
    CheckVariational,
}

/// The experiment block: {"name": …, "params": {…}}; `params` is decoded
/// strictly against the per-command parameter struct.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn decode<T:serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| invalid(format!("experiment params: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Structural validation: grid invariants, model/system compatibility and
    /// all positivity constraints, before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        if let Some(model) = &self.model {
            model.build()?;
        }
        if let Some(sys) = &self.system {
            let model = self
                .model
                .as_ref()
                .ok_or_else(|| invalid("a system block requires a model block"))?
                .build()?;
            let spec = SystemSpec {
                system: sys.kind,
                model,
                zeta: sys.zeta,
                lambda: sys.lambda,
                mu: sys.mu,
                dt: sys.dt,
                t_end: sys.t_end,
                integrator: sys.integrator,
                force_form: sys.force_form,
                cfl_factor: sys.cfl_factor,
                enforce_cfl: sys.enforce_cfl,
            };
            spec.validate(self.grid.dim).map_err(|e| invalid(e.to_string()))?;
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir must not be empty"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<TorusGrid>> {
        self.grid.build()
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        self.model
            .as_ref()
            .ok_or_else(|| invalid("this command requires a model block"))?
            .build()
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let sys = self
            .system
            .as_ref()
            .ok_or_else(|| invalid("this command requires a system block"))?;
        Ok(SystemSpec {
            system: sys.kind,
            model: self.energy_model()?,
            zeta: sys.zeta,
            lambda: sys.lambda,
            mu: sys.mu,
            dt: sys.dt,
            t_end: sys.t_end,
            integrator: sys.integrator,
            force_form: sys.force_form,
            cfl_factor: sys.cfl_factor,
            enforce_cfl: sys.enforce_cfl,
        })
    }

    /// Fully resolved echo, written into every artifact directory.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }
}
