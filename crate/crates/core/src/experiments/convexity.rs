//! `check-convexity`: sample the Hessian conditions of the gradient energy
//! over configured density bands and compare against expectations.

use super::common::write_text;
use super::{ExperimentError, Outcome, Result};
use crate::config::{CapillarityConfig, LocalEnergyConfig, RunConfig};
use crate::energy_models::check_convexity;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexityParams {
    pub cases: Vec<ConvexityCase>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexityCase {
    pub label: String,
    pub h: LocalEnergyConfig,
    pub kappa: CapillarityConfig,
    pub band: (f64, f64),
    #[serde(default = "default_q_max")]
    pub q_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub expect_strictly_convex: Option<bool>,
    #[serde(default)]
    pub expect_uniformly_convex: Option<bool>,
}

fn default_q_max() -> f64 {
    3.0
}
fn default_samples() -> usize {
    101
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: ConvexityParams = cfg.experiment.decode()?;
    if params.cases.is_empty() {
        return Err(ExperimentError::Other("check-convexity needs at least one case".into()));
    }
    let mut csv = String::from(
        "label,min_d2h,min_kappa,min_convexity_condition,min_hessian_eig,strictly_convex,uniformly_convex,alpha1,alpha2\n",
    );
    let mut outcome = Outcome::passing();
    for case in &params.cases {
        let local = case.h.build()?;
        let cap = case.kappa.build()?;
        let rep = check_convexity(&local, &cap, case.band, case.q_max, case.samples)?;
        csv.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{},{},{:e},{}\n",
            case.label,
            rep.min_d2h,
            rep.min_kappa,
            rep.min_convexity_condition,
            rep.min_hessian_eigenvalue,
            rep.strictly_convex,
            rep.uniformly_convex,
            rep.alpha1,
            rep.alpha2.map(|v| format!("{v:e}")).unwrap_or_default()
        ));
        if let Some(expect) = case.expect_strictly_convex {
            outcome.check(
                rep.strictly_convex == expect,
                format!("{}: strictly_convex = {} (expected {expect})", case.label, rep.strictly_convex),
            );
        }
        if let Some(expect) = case.expect_uniformly_convex {
            outcome.check(
                rep.uniformly_convex == expect,
                format!(
                    "{}: uniformly_convex = {} (expected {expect})",
                    case.label, rep.uniformly_convex
                ),
            );
        }
        outcome.note(format!(
            "{}: min h''={:.3e}, min κκ''−2κ'²={:.3e}, min Hessian eig={:.3e}",
            case.label, rep.min_d2h, rep.min_convexity_condition, rep.min_hessian_eigenvalue
        ));
    }
    write_text(&out_dir.join("convexity.csv"), &csv)?;
    Ok(outcome)
}
