//! Shared plumbing for the experiment drivers: initial-data assembly,
//! deterministic worker pools, artifact-directory setup.

use super::{ExperimentError, Result};
use crate::config::{InitialData, RunConfig, Wave};
use crate::dynamics::State;
use crate::torus_field::{ScalarField, TorusGrid, VectorField};
use std::path::Path;
use std::sync::Arc;

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Create the artifact directory and drop the resolved config echo into it.
pub fn prepare_dir(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_text(&out_dir.join("config_resolved.json"), &(cfg.resolved_json() + "\n"))
}

fn wave_field(grid: &Arc<TorusGrid>, waves: &[Wave], component: usize) -> Result<ScalarField> {
    let two_pi_over_l = 2.0 * std::f64::consts::PI / grid.period();
    for w in waves {
        if w.axis >= grid.dim() || w.component >= grid.dim() {
            return Err(ExperimentError::Other(format!(
                "wave axis/component out of range for dim {}",
                grid.dim()
            )));
        }
    }
    Ok(ScalarField::from_fn(grid.clone(), |x| {
        waves
            .iter()
            .filter(|w| w.component == component)
            .map(|w| w.amplitude * (two_pi_over_l * w.mode as f64 * x[w.axis] + w.phase).sin())
            .sum()
    })?)
}

/// Build (ρ, m) from an initial-data block: ρ = ρ₀ + Σ waves, u = Σ waves,
/// m = ρu.
pub fn initial_state(grid: &Arc<TorusGrid>, init: &InitialData) -> Result<State> {
    let rho = ScalarField::constant(grid.clone(), init.rho_base)?
        .add(&wave_field(grid, &init.rho_waves, 0)?)?;
    let mut comps = Vec::with_capacity(grid.dim());
    for c in 0..grid.dim() {
        let u_c = wave_field(grid, &init.u_waves, c)?;
        comps.push(u_c.mul(&rho)?);
    }
    Ok(State::new(rho, VectorField::new(grid.clone(), comps)?, 0.0)?)
}

/// Low-mode twin perturbation: ρ += δ·sin(2π·mode·x/L) (mean-free) and
/// u += δ·sin(2π·mode·x/L) on every component.
pub fn perturb_state(state: &State, delta: f64, mode: i64) -> Result<State> {
    let grid = state.rho.grid().clone();
    let two_pi_over_l = 2.0 * std::f64::consts::PI / grid.period();
    let bump = ScalarField::from_fn(grid.clone(), |x| {
        delta * (two_pi_over_l * mode as f64 * x[0]).sin()
    })?;
    let rho = state.rho.add(&bump)?;
    // m = ρ_new (u_old + δ sin) component-wise
    let mut comps = Vec::with_capacity(grid.dim());
    for c in 0..grid.dim() {
        let u_old = state.m.component(c).zip(&state.rho, |m, r| m / r)?;
        comps.push(u_old.add(&bump)?.mul(&rho)?);
    }
    Ok(State::new(rho, VectorField::new(grid, comps)?, state.time)?)
}

/// Worker count for sweep parallelism: min(items, available cores), capped by
/// the HYDROLAB_THREADS environment variable when set.
pub fn worker_count(items: usize) -> usize {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("HYDROLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(cores);
    items.max(1).min(cap.min(cores).max(1))
}

/// Deterministic indexed parallel map: results come back in input order
/// regardless of scheduling; each worker owns its items exclusively.
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<Result<R>>
where
    T: Send + Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    let workers = worker_count(items.len());
    if workers <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let n = items.len();
    let mut results: Vec<Option<Result<R>>> = (0..n).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results_mx = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i, &items[i]);
                results_mx.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker filled every slot")).collect()
}

/// Composite-Simpson quadrature over uniformly spaced samples (even interval
/// count required; falls back to trapezoid on the last interval otherwise).
pub fn simpson(samples: &[f64], dt: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let m = if (n - 1).is_multiple_of(2) { n - 1 } else { n - 2 };
    let mut acc = samples[0] + samples[m];
    for (i, &v) in samples.iter().enumerate().take(m).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = acc * dt / 3.0;
    if m != n - 1 {
        total += 0.5 * dt * (samples[n - 2] + samples[n - 1]);
    }
    total
}
