//! `twin-stability`: perturbed twin runs; checks that the theorem's
//! functional stays bounded by a δ-independent multiple of its initial value.

use super::common::{initial_state, parallel_map, perturb_state, write_text};
use super::{ExperimentError, Outcome, Result};
use crate::config::{InitialData, RunConfig};
use crate::dynamics::{run_trajectory, State};
use crate::energy_models::EnergyModel;
use crate::relative_energy::{reduced_relative_energy, relative_kinetic, relative_total};
use crate::torus_field::{gradient, l2_norm, l2_norm_vector};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwinFunctional {
    /// φ(t): relative total energy (constant-capillarity stability).
    Phi,
    /// Φ(t): ∫½ρ|u−ū|² + ‖ρ−ρ̄‖² + ‖∇(ρ−ρ̄)‖² (uniformly convex κ(ρ)).
    BigPhi,
    /// Ψ(t): relative total energy of the QHD functional.
    Psi,
    /// η_R(t): reduced relative energy (non-convex h, constant κ).
    EtaR,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinParams {
    pub functional: TwinFunctional,
    pub initial: InitialData,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_mode")]
    pub perturb_mode: i64,
    #[serde(default = "default_spread")]
    pub max_spread: f64,
    #[serde(default = "default_small_factor")]
    pub max_small_delta_factor: f64,
    #[serde(default = "default_every")]
    pub observe_every: usize,
}

fn default_deltas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_mode() -> i64 {
    1
}
fn default_spread() -> f64 {
    0.25
}
fn default_small_factor() -> f64 {
    1.5
}
fn default_every() -> usize {
    4
}

fn evaluate(functional: TwinFunctional, model: &EnergyModel, s: &State, s_bar: &State) -> Result<f64> {
    Ok(match functional {
        TwinFunctional::Phi | TwinFunctional::Psi => relative_total(model, s, s_bar)?,
        TwinFunctional::BigPhi => {
            let drho = s.rho.sub(&s_bar.rho)?;
            relative_kinetic(s, s_bar, model.band.min)?
                + l2_norm(&drho).powi(2)
                + l2_norm_vector(&gradient(&drho)?).powi(2)
        }
        TwinFunctional::EtaR => reduced_relative_energy(model, s, s_bar)?,
    })
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: TwinParams = cfg.experiment.decode()?;
    if params.deltas.is_empty() {
        return Err(ExperimentError::Other("twin-stability needs a delta list".into()));
    }
    let grid = cfg.grid()?;
    let spec = cfg.system_spec()?;
    let model = spec.model.clone();
    let s0_bar = initial_state(&grid, &params.initial)?;
    let traj_bar = run_trajectory(&spec, s0_bar.clone(), params.observe_every)?;

    let results = parallel_map(params.deltas.clone(), |_, &delta| {
        let s0 = perturb_state(&s0_bar, delta, params.perturb_mode)?;
        let traj = run_trajectory(&spec, s0, params.observe_every)?;
        let mut f0 = None;
        let mut sup = 0.0f64;
        for (s, s_bar) in traj.states.iter().zip(&traj_bar.states) {
            let v = evaluate(params.functional, &model, s, s_bar)?;
            let v0 = *f0.get_or_insert(v);
            if v0 <= 0.0 {
                return Err(ExperimentError::Other(format!(
                    "degenerate functional at t=0 for delta {delta}: {v0}"
                )));
            }
            sup = sup.max(v / v0);
        }
        Ok((f0.unwrap_or(0.0), sup))
    });

    let mut csv = String::from("delta,f0,sup_ratio\n");
    let mut ratios = Vec::new();
    for (delta, res) in params.deltas.iter().zip(results) {
        let (f0, sup) = res?;
        csv.push_str(&format!("{delta:e},{f0:e},{sup:e}\n"));
        ratios.push((*delta, sup));
    }
    write_text(&out_dir.join("twin_stability.csv"), &csv)?;

    let sups: Vec<f64> = ratios.iter().map(|(_, s)| *s).collect();
    let max_ratio = sups.iter().cloned().fold(f64::MIN, f64::max);
    let min_ratio = sups.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max_ratio / min_ratio - 1.0;

    // ratio at the smallest δ must not exceed the largest-δ ratio by more
    // than the configured factor (δ→0 must not diverge)
    let (_, ratio_at_largest) = ratios
        .iter()
        .cloned()
        .fold((f64::MIN, 0.0), |acc, (d, s)| if d > acc.0 { (d, s) } else { acc });
    let (_, ratio_at_smallest) = ratios
        .iter()
        .cloned()
        .fold((f64::MAX, 0.0), |acc, (d, s)| if d < acc.0 { (d, s) } else { acc });

    let mut outcome = Outcome::passing();
    outcome.note(format!("sup-ratios per delta: {ratios:?}"));
    outcome.check(
        spread <= params.max_spread,
        format!("ratio spread {spread:.3} <= {:.3} across deltas", params.max_spread),
    );
    outcome.check(
        ratio_at_smallest <= params.max_small_delta_factor * ratio_at_largest,
        format!(
            "smallest-delta ratio {ratio_at_smallest:.3} <= {:.2} x largest-delta ratio {ratio_at_largest:.3}",
            params.max_small_delta_factor
        ),
    );
    Ok(outcome)
}
