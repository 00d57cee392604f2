//! `model-convergence`: one NSK run against a sweep of lower-order runs,
//! identical initial data; fits the α-decay of sup_t ∫η_R^α and its three
//! constituents, runs the rate-term closure at each α, and monitors the
//! a-priori bounds the theory assumes instead of assuming them.

use super::common::{initial_state, parallel_map, simpson, write_text};
use super::{ExperimentError, Outcome, Result};
use crate::config::{InitialData, RunConfig};
use crate::dynamics::{run_trajectory, SystemKind, SystemSpec};
use crate::energy_models::{Capillarity, EnergyModel, ModelKind};
use crate::oracle::fit_rate;
use crate::relative_energy::{rate_terms_lo, reduced_relative_energy_lo};
use crate::torus_field::{divergence, l2_norm, linf_norm_vector};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    pub initial: InitialData,
    pub alphas: Vec<f64>,
    #[serde(default = "default_slope_range")]
    pub slope_range: (f64, f64),
    #[serde(default = "default_r2")]
    pub min_r_squared: f64,
    #[serde(default = "default_part_slope")]
    pub max_part_slope: f64,
    #[serde(default = "default_every")]
    pub observe_every: usize,
    #[serde(default = "default_closure_tol")]
    pub closure_tol: f64,
}

fn default_slope_range() -> (f64, f64) {
    (-1.3, -0.7)
}
fn default_r2() -> f64 {
    0.95
}
fn default_part_slope() -> f64 {
    -0.7
}
fn default_every() -> usize {
    8
}
fn default_closure_tol() -> f64 {
    5e-2
}

struct SweepRow {
    alpha: f64,
    sup_total: f64,
    sup_grad: f64,
    sup_penalty: f64,
    sup_kinetic: f64,
    closure_rel: f64,
    rho_min: f64,
    rho_max: f64,
    m_max: f64,
    div_budget_used: f64,
    div_budget: f64,
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: ConvergenceParams = cfg.experiment.decode()?;
    if params.alphas.len() < 3 {
        return Err(ExperimentError::Other("model-convergence needs >= 3 alphas".into()));
    }
    let grid = cfg.grid()?;
    let nsk_spec = cfg.system_spec()?;
    if nsk_spec.system != SystemKind::NavierStokesKorteweg {
        return Err(ExperimentError::Other(
            "model-convergence requires system.kind = navier_stokes_korteweg".into(),
        ));
    }
    let dim = grid.dim() as f64;
    if nsk_spec.lambda + 2.0 / 3.0 * nsk_spec.mu <= 0.0 {
        return Err(ExperimentError::Other("model-convergence requires lambda + (2/3)mu > 0".into()));
    }
    let (local, c_kappa) = match &nsk_spec.model.kind {
        ModelKind::Korteweg { local, cap: Capillarity::Constant { c } } => (local.clone(), *c),
        _ => {
            return Err(ExperimentError::Other(
                "model-convergence requires a constant-capillarity Korteweg model".into(),
            ))
        }
    };
    let band = nsk_spec.model.band;

    let s0 = initial_state(&grid, &params.initial)?;
    let nsk_traj = run_trajectory(&nsk_spec, s0.clone(), params.observe_every)?;

    let rows = parallel_map(params.alphas.clone(), |_, &alpha| {
        let lo_model = EnergyModel::new(
            ModelKind::LowerOrder { local: local.clone(), c_kappa, alpha },
            band,
        )?;
        let lo_spec = SystemSpec {
            system: SystemKind::LowerOrder,
            model: lo_model,
            ..nsk_spec.clone()
        };
        let lo_traj = run_trajectory(&lo_spec, s0.clone(), params.observe_every)?;

        // initial lower-order energy bounds the time-integrated (div u)²
        let e0 = crate::dynamics::lower_order_total_energy(&lo_spec, &lo_traj.states[0])?;
        let div_budget = e0 / (lo_spec.lambda + 2.0 * lo_spec.mu / dim);

        let mut sup = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut etas = Vec::new();
        let mut rho_min = f64::INFINITY;
        let mut rho_max = f64::NEG_INFINITY;
        let mut m_max: f64 = 0.0;
        let mut div_sq = Vec::new();
        for (s_nsk, s_lo) in nsk_traj.states.iter().zip(&lo_traj.states) {
            let parts = reduced_relative_energy_lo(s_nsk, s_lo, c_kappa, alpha, band.min)?;
            sup.0 = sup.0.max(parts.total());
            sup.1 = sup.1.max(parts.grad_term);
            sup.2 = sup.2.max(parts.penalty_term);
            sup.3 = sup.3.max(parts.kinetic_term);
            etas.push(parts.total());
            rho_min = rho_min.min(s_lo.rho.min_value()).min(s_nsk.rho.min_value());
            rho_max = rho_max.max(s_lo.rho.max_value()).max(s_nsk.rho.max_value());
            m_max = m_max.max(linf_norm_vector(&s_lo.m)).max(linf_norm_vector(&s_nsk.m));
            let u = s_lo.velocity(band.min)?;
            div_sq.push(l2_norm(&divergence(&u)?).powi(2));
        }
        let tau = nsk_traj.cadence_dt();
        let div_budget_used = simpson(&div_sq, tau);

        // rate-term closure Σ∫A_i vs central-difference d/dt∫η_R^α
        let mut closure_rel: f64 = 0.0;
        for i in 1..nsk_traj.states.len() - 1 {
            let lhs = (etas[i + 1] - etas[i - 1]) / (2.0 * tau);
            let terms = rate_terms_lo(
                &nsk_traj.states[i],
                &lo_traj.states[i],
                &local,
                c_kappa,
                alpha,
                lo_spec.lambda,
                lo_spec.mu,
                band.min,
            )?;
            let scale = lhs.abs().max(terms.sum_reduced().abs()).max(1e-12);
            closure_rel = closure_rel.max((terms.sum_reduced() - lhs).abs() / scale);
        }

        Ok(SweepRow {
            alpha,
            sup_total: sup.0,
            sup_grad: sup.1,
            sup_penalty: sup.2,
            sup_kinetic: sup.3,
            closure_rel,
            rho_min,
            rho_max,
            m_max,
            div_budget_used,
            div_budget,
        })
    });

    let mut csv = String::from(
        "alpha,sup_eta_r,sup_grad_term,sup_penalty_term,sup_kinetic_term,closure_max_rel,rho_min,rho_max,m_max,div_budget_used,div_budget\n",
    );
    let mut table = Vec::new();
    for r in rows {
        let row = r?;
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            row.alpha,
            row.sup_total,
            row.sup_grad,
            row.sup_penalty,
            row.sup_kinetic,
            row.closure_rel,
            row.rho_min,
            row.rho_max,
            row.m_max,
            row.div_budget_used,
            row.div_budget
        ));
        table.push(row);
    }
    write_text(&out_dir.join("model_convergence.csv"), &csv)?;

    let alphas: Vec<f64> = table.iter().map(|r| r.alpha).collect();
    let totals: Vec<f64> = table.iter().map(|r| r.sup_total.max(1e-300)).collect();
    let fit = fit_rate(&alphas, &totals)?;

    let mut outcome = Outcome::passing();
    outcome.note(format!("sup_t ∫η_R^α over alpha: {totals:?}"));
    outcome.check(
        fit.slope >= params.slope_range.0 && fit.slope <= params.slope_range.1,
        format!(
            "eta_R slope {:.3} in [{:.2}, {:.2}]",
            fit.slope, params.slope_range.0, params.slope_range.1
        ),
    );
    outcome.check(
        fit.r_squared >= params.min_r_squared,
        format!("fit r² {:.4} >= {:.2}", fit.r_squared, params.min_r_squared),
    );
    for (label, values) in [
        ("grad term", table.iter().map(|r| r.sup_grad.max(1e-300)).collect::<Vec<_>>()),
        ("penalty term", table.iter().map(|r| r.sup_penalty.max(1e-300)).collect()),
        ("kinetic term", table.iter().map(|r| r.sup_kinetic.max(1e-300)).collect()),
    ] {
        let part_fit = fit_rate(&alphas, &values)?;
        outcome.check(
            part_fit.slope <= params.max_part_slope,
            format!("{label} slope {:.3} <= {:.2} (bounded by C/alpha)", part_fit.slope, params.max_part_slope),
        );
    }
    let worst_closure = table.iter().map(|r| r.closure_rel).fold(0.0f64, f64::max);
    outcome.check(
        worst_closure <= params.closure_tol,
        format!("rate-term closure max rel mismatch {worst_closure:.3e} <= {:.1e}", params.closure_tol),
    );
    // a-priori bound monitors (hypotheses of the convergence theorem)
    let band_ok = table.iter().all(|r| r.rho_min >= band.min && r.rho_max <= band.max);
    outcome.check(band_ok, "densities stayed in the admissible band during the sweep".to_string());
    let budget_ok = table.iter().all(|r| r.div_budget_used <= r.div_budget * (1.0 + 1e-9));
    outcome.check(budget_ok, "‖div u^α‖²_{L²(t,x)} within the initial-energy budget".to_string());
    outcome.note(format!(
        "measured sup|m| over the sweep: {:.3e}",
        table.iter().map(|r| r.m_max).fold(0.0f64, f64::max)
    ));
    Ok(outcome)
}
