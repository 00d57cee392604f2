//! `verify-noether`: spectral residual of ρ∇(δE/δρ) + ∇·S over a battery of
//! random band-limited densities, per model.

use super::common::write_text;
use super::{Outcome, Result};
use crate::config::{ModelConfig, RunConfig};
use crate::torus_field::{linf_norm_vector, random_band_limited, ScalarField};
use rand::SeedableRng;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoetherParams {
    pub models: Vec<ModelConfig>,
    #[serde(default = "default_fields")]
    pub fields: usize,
    #[serde(default = "default_max_mode")]
    pub max_mode: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_rho_base")]
    pub rho_base: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_fields() -> usize {
    10
}
fn default_max_mode() -> usize {
    6
}
fn default_amplitude() -> f64 {
    0.15
}
fn default_rho_base() -> f64 {
    1.2
}
fn default_tolerance() -> f64 {
    1e-8
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: NoetherParams = cfg.experiment.decode()?;
    if params.models.is_empty() {
        return Err(super::ExperimentError::Other("verify-noether needs a model battery".into()));
    }
    let grid = cfg.grid()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut csv = String::from("model,field_index,relative_residual,pass\n");
    let mut outcome = Outcome::passing();

    for (mi, mc) in params.models.iter().enumerate() {
        let model = mc.build()?;
        let mut worst: f64 = 0.0;
        for fi in 0..params.fields {
            let pert = random_band_limited(&grid, params.max_mode, params.amplitude, &mut rng)?;
            let rho = ScalarField::constant(grid.clone(), params.rho_base)?.add(&pert)?;
            let (residual, div_s) = model.noether_residual(&rho)?;
            let rel = linf_norm_vector(&residual) / linf_norm_vector(&div_s).max(1e-300);
            worst = worst.max(rel);
            csv.push_str(&format!(
                "{:?},{fi},{rel:e},{}\n",
                mc.model_type,
                rel <= params.tolerance
            ));
        }
        outcome.check(
            worst <= params.tolerance,
            format!(
                "noether residual (model {mi} {:?}): max {worst:.3e} <= {:.1e}",
                mc.model_type, params.tolerance
            ),
        );
    }
    write_text(&out_dir.join("noether.csv"), &csv)?;
    Ok(outcome)
}
