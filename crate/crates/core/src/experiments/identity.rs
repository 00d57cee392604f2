//! `verify-identity`: co-evolve a perturbed twin pair, measure the
//! relative-energy identity residual under simultaneous (dt, cadence)
//! refinement, fit its order, and (for gradient energies) run the pointwise
//! local-identity / flux check.

use super::common::{initial_state, perturb_state, write_text};
use super::{Outcome, Result};
use crate::config::{InitialData, RunConfig};
use crate::dynamics::run_trajectory;
use crate::oracle::fit_rate;
use crate::relative_energy::{
    flux_divergence_check, identity_residual, local_identity_residual, reports_to_csv,
};
use crate::torus_field::linf_norm;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityParams {
    pub initial: InitialData,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_mode")]
    pub perturb_mode: i64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_every")]
    pub observe_every: usize,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
    #[serde(default = "default_max_rel")]
    pub max_rel_residual: f64,
    /// Pointwise Appendix-style local check (gradient energies only).
    #[serde(default)]
    pub local_check: bool,
}

fn default_delta() -> f64 {
    1e-2
}
fn default_mode() -> i64 {
    2
}
fn default_levels() -> usize {
    3
}
fn default_every() -> usize {
    8
}
fn default_min_order() -> f64 {
    1.8
}
fn default_max_rel() -> f64 {
    1e-4
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: IdentityParams = cfg.experiment.decode()?;
    let grid = cfg.grid()?;
    let base_spec = cfg.system_spec()?;
    let model = base_spec.model.clone();
    let s0_bar = initial_state(&grid, &params.initial)?;
    let s0 = perturb_state(&s0_bar, params.delta, params.perturb_mode)?;

    let mut csv = String::from("level,dt,tau,max_residual,scale,rel_residual,local_linf,divj_rel\n");
    let mut taus = Vec::new();
    let mut max_residuals = Vec::new();
    let mut rel_residuals = Vec::new();
    let mut local_linfs = Vec::new();
    let mut divj_ok = true;

    for level in 0..params.levels.max(2) {
        let mut spec = base_spec.clone();
        spec.dt = base_spec.dt / f64::powi(2.0, level as i32);
        let traj = run_trajectory(&spec, s0.clone(), params.observe_every)?;
        let traj_bar = run_trajectory(&spec, s0_bar.clone(), params.observe_every)?;
        let reports = identity_residual(&model, &traj, &traj_bar, spec.zeta)?;
        if level == 0 {
            write_text(&out_dir.join("identity_level0.csv"), &reports_to_csv(&reports))?;
        }
        let scale = reports
            .iter()
            .filter_map(|r| r.rhs_value)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let max_res = reports
            .iter()
            .filter_map(|r| r.residual)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let tau = traj.cadence_dt();

        let mut local_linf = f64::NAN;
        if params.local_check {
            let n = traj.states.len();
            let mut worst: f64 = 0.0;
            for i in 1..n - 1 {
                let res = local_identity_residual(
                    &model,
                    (&traj.states[i - 1], &traj_bar.states[i - 1]),
                    (&traj.states[i], &traj_bar.states[i]),
                    (&traj.states[i + 1], &traj_bar.states[i + 1]),
                    tau,
                )?;
                worst = worst.max(linf_norm(&res));
                let (divj, jnorm) = flux_divergence_check(&model, &traj.states[i], &traj_bar.states[i])?;
                if divj > 1e-10 * jnorm.max(1e-12) {
                    divj_ok = false;
                }
            }
            local_linf = worst;
            local_linfs.push(worst);
        }

        csv.push_str(&format!(
            "{level},{:e},{tau:e},{max_res:e},{scale:e},{:e},{local_linf:e},{}\n",
            spec.dt,
            max_res / scale,
            divj_ok
        ));
        taus.push(tau);
        max_residuals.push(max_res.max(1e-300));
        rel_residuals.push(max_res / scale);
    }

    write_text(&out_dir.join("identity_refinement.csv"), &csv)?;

    let fit = fit_rate(&taus, &max_residuals)?;
    let mut outcome = Outcome::passing();
    outcome.note(format!(
        "identity residual per level: {:?} (tau {:?})",
        max_residuals, taus
    ));
    outcome.check(
        fit.slope >= params.min_order,
        format!("identity residual order {:.2} >= {:.2}", fit.slope, params.min_order),
    );
    let finest = *rel_residuals.last().unwrap();
    outcome.check(
        finest <= params.max_rel_residual,
        format!("finest relative residual {finest:.3e} <= {:.1e}", params.max_rel_residual),
    );
    if params.local_check {
        let local_fit = fit_rate(&taus, &local_linfs)?;
        outcome.check(
            local_fit.slope >= params.min_order,
            format!("local identity L∞ order {:.2} >= {:.2}", local_fit.slope, params.min_order),
        );
        outcome.check(divj_ok, "∫∇·J = 0 within 1e-10·‖J‖ at every sample".to_string());
    }
    Ok(outcome)
}
