//! `simulate`: march one initial state and emit per-step diagnostics plus
//! field snapshots in the torus snapshot format.

use super::common::{initial_state, write_text};
use super::{Outcome, Result};
use crate::config::{InitialData, RunConfig};
use crate::dynamics::{friction_dissipation, integrate_with, viscous_dissipation};
use crate::torus_field::snapshot::write_snapshot;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub initial: InitialData,
    #[serde(default = "one")]
    pub observe_every: usize,
}

fn one() -> usize {
    1
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let params: SimulateParams = cfg.experiment.decode()?;
    let grid = cfg.grid()?;
    let spec = cfg.system_spec()?;
    let s0 = initial_state(&grid, &params.initial)?;

    let d = grid.dim();
    let mut csv = String::from("t,mass");
    for a in 0..d {
        csv.push_str(&format!(",momentum_{a}"));
    }
    csv.push_str(",kinetic,potential,total,viscous_dissipation,friction_dissipation\n");

    let snapshot_every = cfg.output.snapshot_every;
    let mut observed = 0usize;
    let mut mass0 = None;
    let mut max_mass_drift: f64 = 0.0;
    integrate_with(&spec, s0, params.observe_every, |s| {
        let kinetic = s.kinetic_energy()?;
        let potential = spec.model.energy_total(&s.rho)?;
        let mass = s.mass();
        let m0 = *mass0.get_or_insert(mass);
        max_mass_drift = max_mass_drift.max(((mass - m0) / m0).abs());
        csv.push_str(&format!("{:e},{:e}", s.time, mass));
        for v in s.momentum() {
            csv.push_str(&format!(",{v:e}"));
        }
        csv.push_str(&format!(
            ",{:e},{:e},{:e},{:e},{:e}\n",
            kinetic,
            potential,
            kinetic + potential,
            viscous_dissipation(&spec, s)?,
            friction_dissipation(&spec, s)?,
        ));
        if snapshot_every > 0 && observed.is_multiple_of(snapshot_every) {
            let mut fields: Vec<(String, &crate::torus_field::ScalarField)> =
                vec![("rho".to_string(), &s.rho)];
            let names: Vec<String> = (0..d).map(|a| format!("m_{a}")).collect();
            for (a, name) in names.iter().enumerate() {
                fields.push((name.clone(), s.m.component(a)));
            }
            let borrowed: Vec<(&str, &crate::torus_field::ScalarField)> =
                fields.iter().map(|(n, f)| (n.as_str(), *f)).collect();
            write_snapshot(out_dir, &format!("state_{observed:06}"), &borrowed).map_err(|e| {
                crate::dynamics::DynamicsError::InvalidSpec(format!("snapshot: {e}"))
            })?;
        }
        observed += 1;
        Ok(())
    })?;

    write_text(&out_dir.join("diagnostics.csv"), &csv)?;
    let mut outcome = Outcome::passing();
    outcome.note(format!("simulate: {observed} observations written"));
    outcome.check(
        max_mass_drift <= 1e-10,
        format!("mass drift {max_mass_drift:.3e} <= 1e-10 (relative)"),
    );
    let final_energy_line = csv.lines().last().unwrap_or("").to_string();
    outcome.note(format!("final diagnostics row: {final_energy_line}"));
    Ok(outcome)
}
