//! Right-hand sides in conservative variables (ρ, m) and explicit time
//! stepping.
//!
//! Every system has the form
//!   ∂t ρ = −∇·m
//!   ∂t m = −∇·(m⊗m/ρ) + ∇·S(ρ) − ζ m  [+ ∇·σ[u] for the viscous systems]
//! with the capillary/electrostatic force assembled through the stress tensor
//! (conservative form, preserves discrete momentum exactly). The primitive
//! form −ρ∇(δE/δρ) exists behind a switch for cross-validation only.
//!
//! Stepping is fully explicit (classical RK4 by default, SSP-RK3 optional);
//! the configured dt is validated against a CFL-style bound in which the
//! third-order capillary term is the stiffest scale.

use crate::energy_models::{EnergyError, EnergyModel, ModelKind};
use crate::torus_field::{
    self as tf, dealias, dealias_vector, divergence, gradient, integrate, tensor_divergence,
    vector_gradient, FieldError, ScalarField, TensorField, VectorField,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("at t = {time}: {source}")]
    AtTime { time: f64, source: EnergyError },
    #[error("non-finite right-hand side at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid system spec: {0}")]
    InvalidSpec(String),
    #[error("dt = {dt} violates the CFL bound {bound} (cfl_factor applied)")]
    CflViolation { dt: f64, bound: f64 },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Conservative state (ρ, m) at a time.
#[derive(Debug, Clone)]
pub struct State {
    pub rho: ScalarField,
    pub m: VectorField,
    pub time: f64,
}

impl State {
    pub fn new(rho: ScalarField, m: VectorField, time: f64) -> Result<Self> {
        if !rho.grid().same_as(m.grid()) {
            return Err(FieldError::GridMismatch.into());
        }
        Ok(State { rho, m, time })
    }

    /// u = m/ρ; hard failure below the admissible band rather than
    /// regularization (the stability theory assumes ρ ≥ c_ρ > 0).
    pub fn velocity(&self, band_min: f64) -> Result<VectorField> {
        if self.rho.min_value() < band_min {
            return Err(DynamicsError::AtTime {
                time: self.time,
                source: EnergyError::Vacuum {
                    lo: band_min,
                    hi: f64::INFINITY,
                    min: self.rho.min_value(),
                    max: self.rho.max_value(),
                },
            });
        }
        Ok(self.m.map_components(|c| c.zip(&self.rho, |mi, r| mi / r))?)
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.rho)
    }

    pub fn momentum(&self) -> Vec<f64> {
        self.m.components().iter().map(integrate).collect()
    }

    /// ∫ ½|m|²/ρ dx.
    pub fn kinetic_energy(&self) -> Result<f64> {
        let density = self.m.magnitude_squared()?.zip(&self.rho, |m2, r| 0.5 * m2 / r)?;
        Ok(integrate(&density))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    EulerKorteweg,
    NavierStokesKorteweg,
    Qhd,
    EulerPoisson,
    LowerOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    SspRk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceForm {
    /// ∇·S(ρ): conserves discrete momentum exactly.
    Conservative,
    /// −ρ∇(δE/δρ): cross-validation path.
    Primitive,
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub system: SystemKind,
    pub model: EnergyModel,
    pub zeta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub force_form: ForceForm,
    pub cfl_factor: f64,
    /// When set, `integrate_with` rejects dt above the CFL-style bound.
    pub enforce_cfl: bool,
}

impl SystemSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let viscous = self.lambda != 0.0 || self.mu != 0.0;
        match (self.system, &self.model.kind) {
            (SystemKind::EulerKorteweg | SystemKind::NavierStokesKorteweg, ModelKind::Korteweg { .. }) => {}
            (SystemKind::Qhd, ModelKind::Qhd { .. }) => {}
            (SystemKind::EulerPoisson, ModelKind::EulerPoisson { .. }) => {}
            (SystemKind::LowerOrder, ModelKind::LowerOrder { .. }) => {}
            (sys, kind) => {
                return Err(DynamicsError::InvalidSpec(format!(
                    "system {sys:?} incompatible with model {kind:?}"
                )))
            }
        }
        if viscous
            && !matches!(
                self.system,
                SystemKind::NavierStokesKorteweg | SystemKind::LowerOrder
            )
        {
            return Err(DynamicsError::InvalidSpec(
                "viscosity is only part of the NSK and lower-order systems".into(),
            ));
        }
        if self.mu < 0.0 || self.lambda + 2.0 * self.mu / (dim as f64) < 0.0 {
            return Err(DynamicsError::InvalidSpec(format!(
                "need mu >= 0 and lambda + (2/d)mu >= 0, got lambda={}, mu={}",
                self.lambda, self.mu
            )));
        }
        if self.zeta < 0.0 {
            return Err(DynamicsError::InvalidSpec("zeta must be >= 0".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(DynamicsError::InvalidSpec("dt and t_end must be positive".into()));
        }
        if !(self.cfl_factor > 0.0) {
            return Err(DynamicsError::InvalidSpec("cfl_factor must be positive".into()));
        }
        self.model.validate()?;
        Ok(())
    }
}

/// Navier–Stokes stress σ[u] = λ(∇·u) I + μ(∇u + ∇uᵀ).
pub fn viscous_stress(u: &VectorField, lambda: f64, mu: f64) -> Result<TensorField> {
    let grad_u = vector_gradient(u)?;
    let div_u = divergence(u)?;
    let d = u.dim();
    let grid = u.grid().clone();
    let mut comps = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let sym = grad_u
                .component(i, j)
                .add(grad_u.component(j, i))?
                .scale(mu)?;
            let c = if i == j { sym.add(&div_u.scale(lambda)?)? } else { sym };
            comps.push(c);
        }
    }
    TensorField::new(grid, comps).map_err(Into::into)
}

/// Pointwise dissipation density σ[u]:∇u
/// = (λ + 2μ/d)(∇·u)² + 2μ ∇ᵒu:∇ᵒu with ∇ᵒu the trace-free deformation.
pub fn viscous_dissipation_density(u: &VectorField, lambda: f64, mu: f64) -> Result<ScalarField> {
    let sigma = viscous_stress(u, lambda, mu)?;
    let grad_u = vector_gradient(u)?;
    sigma.contract(&grad_u).map_err(Into::into)
}

/// Tendency (dρ/dt, dm/dt) for one state.
pub fn rhs(spec: &SystemSpec, state: &State) -> Result<(ScalarField, VectorField)> {
    let band = spec.model.band;
    let at = |source: EnergyError| DynamicsError::AtTime { time: state.time, source };
    band.check_field(&state.rho).map_err(at)?;
    let u = state.velocity(band.min)?;

    let drho = divergence(&state.m)?.scale(-1.0)?;

    // convective flux m ⊗ u
    let conv = TensorField::outer(&state.m, &u)?;
    let mut dm = tensor_divergence(&conv)?.scale(-1.0)?;

    // capillary / electrostatic / pressure force
    let force = match spec.force_form {
        ForceForm::Conservative => {
            let s = spec.model.stress_tensor(&state.rho).map_err(at)?;
            tensor_divergence(&s)?
        }
        ForceForm::Primitive => {
            let mu_var = spec.model.variational_derivative(&state.rho).map_err(at)?;
            gradient(&mu_var)?.map_components(|c| c.zip(&state.rho, |g, r| -g * r))?
        }
    };
    dm = dm.add(&force)?;

    if spec.lambda != 0.0 || spec.mu != 0.0 {
        let sigma = viscous_stress(&u, spec.lambda, spec.mu)?;
        dm = dm.add(&tensor_divergence(&sigma)?)?;
    }
    if spec.zeta != 0.0 {
        dm = dm.add(&state.m.scale(-spec.zeta)?)?;
    }

    if state.rho.grid().dealias() {
        Ok((dealias(&drho)?, dealias_vector(&dm)?))
    } else {
        Ok((drho, dm))
    }
}

fn advance(state: &State, drho: &ScalarField, dm: &VectorField, dt: f64) -> Result<State> {
    let rho = state.rho.add(&drho.scale(dt)?)?;
    let m = state.m.add(&dm.scale(dt)?)?;
    State::new(rho, m, state.time + dt)
}

fn blend(a: &State, wa: f64, b: &State, wb: f64, time: f64) -> Result<State> {
    let rho = a.rho.scale(wa)?.add(&b.rho.scale(wb)?)?;
    let m = a.m.scale(wa)?.add(&b.m.scale(wb)?)?;
    State::new(rho, m, time)
}

/// One explicit step; pure function State → State.
pub fn step(spec: &SystemSpec, state: &State) -> Result<State> {
    let dt = spec.dt;
    let non_finite = |e: DynamicsError| match e {
        DynamicsError::Field(FieldError::NonFinite) => DynamicsError::NonFinite { time: state.time },
        other => other,
    };
    match spec.integrator {
        Integrator::Rk4 => {
            let (k1r, k1m) = rhs(spec, state).map_err(non_finite)?;
            let s2 = advance(state, &k1r, &k1m, 0.5 * dt)?;
            let (k2r, k2m) = rhs(spec, &s2).map_err(non_finite)?;
            let s3 = advance(state, &k2r, &k2m, 0.5 * dt)?;
            let (k3r, k3m) = rhs(spec, &s3).map_err(non_finite)?;
            let s4 = advance(state, &k3r, &k3m, dt)?;
            let (k4r, k4m) = rhs(spec, &s4).map_err(non_finite)?;
            let c = dt / 6.0;
            let rho = state
                .rho
                .add(&k1r.scale(c)?)?
                .add(&k2r.scale(2.0 * c)?)?
                .add(&k3r.scale(2.0 * c)?)?
                .add(&k4r.scale(c)?)?;
            let m = state
                .m
                .add(&k1m.scale(c)?)?
                .add(&k2m.scale(2.0 * c)?)?
                .add(&k3m.scale(2.0 * c)?)?
                .add(&k4m.scale(c)?)?;
            State::new(rho, m, state.time + dt)
        }
        Integrator::SspRk3 => {
            let (k1r, k1m) = rhs(spec, state).map_err(non_finite)?;
            let s1 = advance(state, &k1r, &k1m, dt)?;
            let (k2r, k2m) = rhs(spec, &s1).map_err(non_finite)?;
            let s1e = advance(&s1, &k2r, &k2m, dt)?;
            let s2 = blend(state, 0.75, &s1e, 0.25, state.time + 0.5 * dt)?;
            let (k3r, k3m) = rhs(spec, &s2).map_err(non_finite)?;
            let s2e = advance(&s2, &k3r, &k3m, dt)?;
            blend(state, 1.0 / 3.0, &s2e, 2.0 / 3.0, state.time + dt)
        }
    }
}

/// CFL-style dt bound: cfl_factor × min(advective, capillary, viscous) scales.
pub fn cfl_bound(spec: &SystemSpec, state: &State) -> Result<f64> {
    let dx = state.rho.grid().dx();
    let band = spec.model.band;
    let u = state.velocity(band.min)?;
    let u_max = tf::linf_norm_vector(&u);
    let rho_max = state.rho.max_value();
    let rho_min = state.rho.min_value();
    let local = spec.model.local();

    // fastest sound-like speed over the realized densities
    let mut c2: f64 = 0.0;
    for &r in state.rho.values() {
        c2 = c2.max(local.dpressure(r).max(0.0));
    }
    if let ModelKind::LowerOrder { c_kappa, alpha, .. } = &spec.model.kind {
        c2 += c_kappa * alpha * rho_max;
    }
    let advective = dx / (u_max + c2.sqrt() + 1e-30);

    let mut bound = advective;
    if let Some((_, cap)) = spec.model.korteweg_parts() {
        let mut kr: f64 = 0.0;
        for &r in state.rho.values() {
            kr = kr.max(cap.kappa(r) * r);
        }
        if kr > 0.0 {
            bound = bound.min(dx * dx / kr.sqrt());
        }
    }
    let nu = (spec.lambda + 2.0 * spec.mu) / rho_min;
    if nu > 0.0 {
        bound = bound.min(dx * dx / nu);
    }
    Ok(spec.cfl_factor * bound)
}

/// March from `s0` to t₀ + t_end, invoking `observe` at step 0 and then every
/// `observe_every` steps. Returns the final state.
pub fn integrate_with(
    spec: &SystemSpec,
    s0: State,
    observe_every: usize,
    mut observe: impl FnMut(&State) -> Result<()>,
) -> Result<State> {
    spec.validate(s0.rho.grid().dim())?;
    if spec.enforce_cfl {
        let bound = cfl_bound(spec, &s0)?;
        if spec.dt > bound {
            return Err(DynamicsError::CflViolation { dt: spec.dt, bound });
        }
    }
    let n_steps = (spec.t_end / spec.dt).round() as usize;
    if n_steps == 0 {
        return Err(DynamicsError::InvalidSpec("t_end shorter than one step".into()));
    }
    let every = observe_every.max(1);
    let mut s = s0;
    observe(&s)?;
    for i in 1..=n_steps {
        s = step(spec, &s)?;
        if i % every == 0 {
            observe(&s)?;
        }
    }
    Ok(s)
}

/// Observed states at a fixed cadence; the shared time grid for the
/// relative-energy machinery.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub observe_every: usize,
    pub dt: f64,
}

impl Trajectory {
    /// Time between consecutive observed states.
    pub fn cadence_dt(&self) -> f64 {
        self.dt * self.observe_every as f64
    }
}

/// Integrate and collect the observed states.
pub fn run_trajectory(spec: &SystemSpec, s0: State, observe_every: usize) -> Result<Trajectory> {
    let mut states = Vec::new();
    integrate_with(spec, s0, observe_every, |s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory { states, observe_every: observe_every.max(1), dt: spec.dt })
}

/// Kinetic + potential energy of a state under the spec's model.
pub fn total_energy(spec: &SystemSpec, state: &State) -> Result<f64> {
    Ok(state.kinetic_energy()? + spec.model.energy_total(&state.rho)?)
}

/// ∫ ζ ρ|u|² dx, the friction dissipation rate.
pub fn friction_dissipation(spec: &SystemSpec, state: &State) -> Result<f64> {
    if spec.zeta == 0.0 {
        return Ok(0.0);
    }
    let u = state.velocity(spec.model.band.min)?;
    let density = u.magnitude_squared()?.mul(&state.rho)?;
    Ok(spec.zeta * integrate(&density))
}

/// ∫ σ[u]:∇u dx, the viscous dissipation rate.
pub fn viscous_dissipation(spec: &SystemSpec, state: &State) -> Result<f64> {
    if spec.lambda == 0.0 && spec.mu == 0.0 {
        return Ok(0.0);
    }
    let u = state.velocity(spec.model.band.min)?;
    Ok(integrate(&viscous_dissipation_density(&u, spec.lambda, spec.mu)?))
}

/// The lower-order model's energy ∫ h + ½ρ|u|² + (C_κ/2)|∇c|² + (αC_κ/2)(ρ−c)².
pub fn lower_order_total_energy(spec: &SystemSpec, state: &State) -> Result<f64> {
    match &spec.model.kind {
        ModelKind::LowerOrder { .. } => {
            Ok(state.kinetic_energy()? + spec.model.energy_total(&state.rho)?)
        }
        _ => Err(DynamicsError::InvalidSpec("not a lower-order system".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_models::{Band, Capillarity, LocalEnergy};
    use crate::torus_field::TorusGrid;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn grid1(n: usize) -> Arc<TorusGrid> {
        TorusGrid::new(1, n, 2.0 * std::f64::consts::PI, true).unwrap()
    }

    fn gamma2() -> LocalEnergy {
        LocalEnergy::GammaLaw { k: 1.0, gamma: 2.0 }
    }

    fn ek_spec(cap: Capillarity, zeta: f64, dt: f64, t_end: f64) -> SystemSpec {
        SystemSpec {
            system: SystemKind::EulerKorteweg,
            model: EnergyModel::new(ModelKind::Korteweg { local: gamma2(), cap }, Band::default())
                .unwrap(),
            zeta,
            lambda: 0.0,
            mu: 0.0,
            dt,
            t_end,
            integrator: Integrator::Rk4,
            force_form: ForceForm::Conservative,
            cfl_factor: 0.3,
            enforce_cfl: true,
        }
    }

    fn smooth_state(g: &Arc<TorusGrid>, amp: f64) -> State {
        let rho = ScalarField::from_fn(g.clone(), |x| 1.5 + amp * x[0].sin()).unwrap();
        let m = VectorField::new(
            g.clone(),
            vec![ScalarField::from_fn(g.clone(), |x| amp * (2.0 * x[0]).cos()).unwrap()],
        )
        .unwrap();
        State::new(rho, m, 0.0).unwrap()
    }

    #[test]
    fn constant_state_has_zero_rhs_for_every_system() {
        let g = grid1(64);
        let rho = ScalarField::constant(g.clone(), 1.4).unwrap();
        let m = VectorField::zero(g.clone()).unwrap();
        let state = State::new(rho, m, 0.0).unwrap();
        let band = Band::default();
        let specs = vec![
            ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0),
            SystemSpec {
                system: SystemKind::Qhd,
                model: EnergyModel::new(ModelKind::Qhd { local: gamma2(), epsilon: 0.5 }, band)
                    .unwrap(),
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
            SystemSpec {
                system: SystemKind::EulerPoisson,
                model: EnergyModel::new(ModelKind::EulerPoisson { local: gamma2(), beta: 1.0 }, band)
                    .unwrap(),
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
            SystemSpec {
                system: SystemKind::LowerOrder,
                model: EnergyModel::new(
                    ModelKind::LowerOrder { local: gamma2(), c_kappa: 0.01, alpha: 100.0 },
                    band,
                )
                .unwrap(),
                lambda: 0.1,
                mu: 0.1,
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
            SystemSpec {
                system: SystemKind::NavierStokesKorteweg,
                lambda: 0.0,
                mu: 0.15,
                ..ek_spec(Capillarity::Constant { c: 0.01 }, 0.0, 1e-3, 1.0)
            },
        ];
        for spec in specs {
            let (drho, dm) = rhs(&spec, &state).unwrap();
            assert!(tf::linf_norm(&drho) < 1e-11, "{:?}", spec.system);
            assert!(tf::linf_norm_vector(&dm) < 1e-10, "{:?}", spec.system);
        }
    }

    #[test]
    fn uniform_friction_decay_at_rk4_order() {
        // constant ρ, constant u, ζ>0: m(t) = m0 e^(−ζt) exactly
        let g = grid1(32);
        let rho = ScalarField::constant(g.clone(), 2.0).unwrap();
        let m0 = 0.7;
        let m = VectorField::new(g.clone(), vec![ScalarField::constant(g.clone(), m0).unwrap()])
            .unwrap();
        let s0 = State::new(rho, m, 0.0).unwrap();
        let zeta = 0.8;
        let mut errs = Vec::new();
        let mut dts = Vec::new();
        for lvl in 0..4 {
            let dt = 0.1 / f64::powi(2.0, lvl);
            let mut spec = ek_spec(Capillarity::Constant { c: 0.1 }, zeta, dt, 1.0);
            spec.enforce_cfl = false; // spatially uniform: pure decay mode
            let end = integrate_with(&spec, s0.clone(), usize::MAX, |_| Ok(())).unwrap();
            let expect = m0 * (-zeta * 1.0f64).exp();
            errs.push((end.m.component(0).values()[0] - expect).abs());
            dts.push(dt);
        }
        let fit = crate::oracle::fit_rate(&dts, &errs).unwrap();
        assert!(fit.slope > 3.7 && fit.slope < 4.3, "RK4 order {}", fit.slope);
    }

    #[test]
    fn ssprk3_order_on_friction_decay() {
        let g = grid1(32);
        let rho = ScalarField::constant(g.clone(), 2.0).unwrap();
        let m = VectorField::new(g.clone(), vec![ScalarField::constant(g.clone(), 0.7).unwrap()])
            .unwrap();
        let s0 = State::new(rho, m, 0.0).unwrap();
        let zeta = 0.8;
        let mut errs = Vec::new();
        let mut dts = Vec::new();
        for lvl in 0..4 {
            let dt = 0.1 / f64::powi(2.0, lvl);
            let mut spec = ek_spec(Capillarity::Constant { c: 0.1 }, zeta, dt, 1.0);
            spec.enforce_cfl = false;
            spec.integrator = Integrator::SspRk3;
            let end = integrate_with(&spec, s0.clone(), usize::MAX, |_| Ok(())).unwrap();
            let expect = 0.7 * (-zeta * 1.0f64).exp();
            errs.push((end.m.component(0).values()[0] - expect).abs());
            dts.push(dt);
        }
        let fit = crate::oracle::fit_rate(&dts, &errs).unwrap();
        assert!(fit.slope > 2.7 && fit.slope < 3.3, "SSP-RK3 order {}", fit.slope);
    }

    #[test]
    fn conservative_and_primitive_forces_agree() {
        let g = grid1(128);
        let state = smooth_state(&g, 0.1);
        let cases = vec![
            ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0),
            ek_spec(Capillarity::Quadratic { a0: 1.0, a2: 1.0 }, 0.0, 1e-3, 1.0),
            SystemSpec {
                system: SystemKind::Qhd,
                model: EnergyModel::new(ModelKind::Qhd { local: gamma2(), epsilon: 0.5 }, Band::default())
                    .unwrap(),
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
            SystemSpec {
                system: SystemKind::EulerPoisson,
                model: EnergyModel::new(
                    ModelKind::EulerPoisson { local: gamma2(), beta: 1.0 },
                    Band::default(),
                )
                .unwrap(),
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
            SystemSpec {
                system: SystemKind::LowerOrder,
                model: EnergyModel::new(
                    ModelKind::LowerOrder { local: gamma2(), c_kappa: 0.01, alpha: 50.0 },
                    Band::default(),
                )
                .unwrap(),
                ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
            },
        ];
        for spec in cases {
            let mut prim = spec.clone();
            prim.force_form = ForceForm::Primitive;
            let (_, dm_c) = rhs(&spec, &state).unwrap();
            let (_, dm_p) = rhs(&prim, &state).unwrap();
            let scale = tf::linf_norm_vector(&dm_c).max(1.0);
            let err = tf::linf_norm_vector(&dm_c.sub(&dm_p).unwrap()) / scale;
            assert!(err <= 1e-8, "{:?}: {err}", spec.system);
        }
    }

    #[test]
    fn viscous_stress_of_rigid_translation_vanishes() {
        let g = grid1(32);
        let u = VectorField::new(g.clone(), vec![ScalarField::constant(g, 0.9).unwrap()]).unwrap();
        let sigma = viscous_stress(&u, 0.4, 0.3).unwrap();
        assert!(tf::linf_norm(sigma.component(0, 0)) < 1e-13);
    }

    #[test]
    fn viscous_dissipation_closed_form_and_nonnegativity() {
        // u = sin(x): ∫σ[u]:∇u = ∫(λ+2μ)cos² = (λ+2μ)π on L=2π
        let g = grid1(128);
        let (lambda, mu) = (0.4, 0.3);
        let u = VectorField::new(
            g.clone(),
            vec![ScalarField::from_fn(g.clone(), |x| x[0].sin()).unwrap()],
        )
        .unwrap();
        let d = viscous_dissipation_density(&u, lambda, mu).unwrap();
        assert_relative_eq!(
            integrate(&d),
            (lambda + 2.0 * mu) * std::f64::consts::PI,
            max_relative = 1e-12
        );

        // nonnegativity for admissible coefficients on random fields
        let g2 = TorusGrid::new(2, 32, 2.0 * std::f64::consts::PI, true).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..100 {
            let ux = tf::random_band_limited(&g2, 6, 1.0, &mut rng).unwrap();
            let uy = tf::random_band_limited(&g2, 6, 1.0, &mut rng).unwrap();
            let u = VectorField::new(g2.clone(), vec![ux, uy]).unwrap();
            let mu = rand::Rng::gen_range(&mut rng, 0.0..1.0);
            let lambda = rand::Rng::gen_range(&mut rng, 0.0..1.0) - mu; // λ + (2/2)μ ≥ 0
            let d = viscous_dissipation_density(&u, lambda, mu).unwrap();
            assert!(integrate(&d) >= -1e-10, "dissipation integral went negative");
        }
    }

    #[test]
    fn mass_and_momentum_conservation_over_thousand_steps() {
        let g = grid1(64);
        let s0 = smooth_state(&g, 0.2);
        let spec = ek_spec(Capillarity::Constant { c: 0.05 }, 0.0, 2e-4, 0.2);
        let mass0 = s0.mass();
        let mom0 = s0.momentum()[0];
        let end = integrate_with(&spec, s0, usize::MAX, |_| Ok(())).unwrap();
        assert!((end.mass() - mass0).abs() <= 1e-11 * mass0.abs());
        let scale = 1.0f64.max(mom0.abs());
        assert!((end.momentum()[0] - mom0).abs() <= 1e-10 * scale);
    }

    #[test]
    fn energy_law_with_friction_closes_at_integrator_order() {
        // d/dt E + ζ∫ρ|u|² = 0; cumulative residual with Simpson quadrature
        let g = grid1(64);
        let s0 = smooth_state(&g, 0.1);
        let zeta = 0.5;
        let mut residuals = Vec::new();
        let mut dts = Vec::new();
        for lvl in 0..3 {
            let dt = 1.2e-2 / f64::powi(2.0, lvl);
            let spec = ek_spec(Capillarity::Constant { c: 0.02 }, zeta, dt, 0.24);
            let mut energies = Vec::new();
            let mut dissipations = Vec::new();
            integrate_with(&spec, s0.clone(), 1, |s| {
                energies.push(total_energy(&spec, s)?);
                dissipations.push(friction_dissipation(&spec, s)?);
                Ok(())
            })
            .unwrap();
            let n = dissipations.len() - 1;
            assert!(n % 2 == 0);
            let mut quad = dissipations[0] + dissipations[n];
            for (i, &v) in dissipations.iter().enumerate().take(n).skip(1) {
                quad += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            quad *= dt / 3.0;
            residuals.push((energies[n] - energies[0] + quad).abs());
            dts.push(dt);
        }
        let fit = crate::oracle::fit_rate(&dts, &residuals).unwrap();
        assert!(fit.slope > 3.5, "energy law order {} ({residuals:?})", fit.slope);
    }

    #[test]
    fn lower_order_energy_balance_and_div_u_budget() {
        let g = grid1(128);
        let rho = ScalarField::from_fn(g.clone(), |x| 1.5 + 0.1 * x[0].sin()).unwrap();
        let m = VectorField::new(
            g.clone(),
            vec![ScalarField::from_fn(g.clone(), |x| 0.1 * x[0].cos()).unwrap()],
        )
        .unwrap();
        let s0 = State::new(rho, m, 0.0).unwrap();
        let (c_kappa, alpha) = (0.01, 100.0);
        let (lambda, mu) = (0.0, 0.15);
        let spec = SystemSpec {
            system: SystemKind::LowerOrder,
            model: EnergyModel::new(
                ModelKind::LowerOrder { local: gamma2(), c_kappa, alpha },
                Band::default(),
            )
            .unwrap(),
            zeta: 0.0,
            lambda,
            mu,
            dt: 5e-4,
            t_end: 0.1,
            integrator: Integrator::Rk4,
            force_form: ForceForm::Conservative,
            cfl_factor: 0.3,
            enforce_cfl: true,
        };
        let mut energies = Vec::new();
        let mut dissipations = Vec::new();
        let mut div_u_sq = Vec::new();
        integrate_with(&spec, s0, 1, |s| {
            energies.push(lower_order_total_energy(&spec, s)?);
            dissipations.push(viscous_dissipation(&spec, s)?);
            let u = s.velocity(spec.model.band.min)?;
            div_u_sq.push(tf::l2_norm(&divergence(&u)?).powi(2));
            Ok(())
        })
        .unwrap();
        let n = dissipations.len() - 1;
        let mut quad = dissipations[0] + dissipations[n];
        let mut div_quad = div_u_sq[0] + div_u_sq[n];
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            quad += w * dissipations[i];
            div_quad += w * div_u_sq[i];
        }
        quad *= spec.dt / 3.0;
        div_quad *= spec.dt / 3.0;
        // energy balance: E(T) − E(0) = −∫∫σ[u]:∇u
        let residual = (energies[n] - energies[0] + quad).abs();
        assert!(residual <= 1e-9 * energies[0].abs(), "balance residual {residual}");
        // (div u) budget: ‖div u‖²_{L²((0,T)×T)} ≤ E(0)/(λ + 2μ/d)
        let budget = energies[0] / (lambda + 2.0 * mu / 1.0);
        assert!(div_quad <= budget, "div budget {div_quad} vs {budget}");
    }

    #[test]
    fn vacuum_aborts_with_failing_time() {
        let g = grid1(64);
        let band = Band::new(0.5, 10.0).unwrap();
        let rho = ScalarField::from_fn(g.clone(), |x| 0.6 + 0.2 * x[0].sin()).unwrap();
        let m = VectorField::zero(g.clone()).unwrap();
        let s0 = State::new(rho, m, 0.0).unwrap();
        let spec = SystemSpec {
            model: EnergyModel::new(
                ModelKind::Korteweg { local: gamma2(), cap: Capillarity::Constant { c: 0.1 } },
                band,
            )
            .unwrap(),
            ..ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0)
        };
        let err = rhs(&spec, &s0).unwrap_err();
        assert!(matches!(err, DynamicsError::AtTime { .. }), "{err}");
    }

    #[test]
    fn spec_validation_rejects_inconsistencies() {
        let base = ek_spec(Capillarity::Constant { c: 0.1 }, 0.0, 1e-3, 1.0);
        let mut s = base.clone();
        s.mu = 0.1; // viscosity on inviscid EK
        assert!(s.validate(1).is_err());
        let mut s = base.clone();
        s.system = SystemKind::NavierStokesKorteweg;
        s.mu = -0.1;
        assert!(s.validate(1).is_err());
        let mut s = base.clone();
        s.system = SystemKind::NavierStokesKorteweg;
        s.mu = 0.1;
        s.lambda = -0.3; // λ + 2μ/d < 0
        assert!(s.validate(1).is_err());
        let mut s = base.clone();
        s.system = SystemKind::Qhd; // mismatched model
        assert!(s.validate(1).is_err());
        assert!(base.validate(1).is_ok());
    }

    #[test]
    fn cfl_guard_rejects_oversized_dt() {
        let g = grid1(256);
        let s0 = smooth_state(&g, 0.1);
        let mut spec = ek_spec(Capillarity::Constant { c: 1.0 }, 0.0, 0.05, 0.1);
        spec.enforce_cfl = true;
        assert!(matches!(
            integrate_with(&spec, s0.clone(), 1, |_| Ok(())),
            Err(DynamicsError::CflViolation { .. })
        ));
        spec.enforce_cfl = false;
        spec.dt = 1e-5;
        spec.t_end = 1e-5;
        assert!(integrate_with(&spec, s0, 1, |_| Ok(())).is_ok());
    }

    #[test]
    fn frictionless_energy_drift_shrinks_at_fourth_order() {
        let g = grid1(64);
        let s0 = smooth_state(&g, 0.2);
        let mut drifts = Vec::new();
        for lvl in 0..3 {
            let dt = 1.4e-2 / f64::powi(2.0, lvl);
            let spec = ek_spec(Capillarity::Constant { c: 0.02 }, 0.0, dt, 0.42);
            let e0 = total_energy(&spec, &s0).unwrap();
            let end = integrate_with(&spec, s0.clone(), usize::MAX, |_| Ok(())).unwrap();
            drifts.push((total_energy(&spec, &end).unwrap() - e0).abs());
        }
        for w in drifts.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 8.0 && ratio < 32.0, "drift ratios {drifts:?}");
        }
    }
}
