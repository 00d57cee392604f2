//! Relative energies, relative-energy identity residuals, reduced relative
//! energies, and rate-term decompositions.
//!
//! The relative total energy between a state (ρ, m) and a reference (ρ̄, m̄)
//! is E(ρ|ρ̄) + ∫½ρ|u−ū|², and along two solutions of the same system it
//! satisfies
//!
//!   d/dt (rel. total) + ζ∫ρ|u−ū|²
//!     = ∫∇ū : S(ρ|ρ̄) − ∫ρ∇ū : (u−ū)⊗(u−ū) ,
//!
//! which for gradient energies specializes to the s/r/H form. Everything here
//! evaluates both sides on sampled trajectories: the left side is always a
//! central difference of the sampled functional (never an analytically
//! expanded ∂t), so the residual genuinely tests the identity.
//!
//! Roles are not symmetric: the second argument is the designated reference
//! ("strong") trajectory whose fields weight the right-hand sides.

use crate::dynamics::{State, Trajectory};
use crate::energy_models::{
    relative as rel, Capillarity, EnergyError, EnergyModel, LocalEnergy, ModelKind,
};
use crate::torus_field::{
    divergence, grad_laplacian, gradient, helmholtz_inverse, integrate, l2_inner, l2_norm,
    l2_norm_vector, laplacian, mean, screened_poisson_mean_free, tensor_divergence,
    vector_gradient, FieldError, ScalarField, TensorField, VectorField,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelEnergyError {
    #[error("trajectories are not on a shared time grid: {0}")]
    TimeGridMismatch(String),
    #[error("model not supported here: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

pub type Result<T> = std::result::Result<T, RelEnergyError>;

/// Per-sample record; `None` fields are not applicable at that sample
/// (endpoints have no central difference) and serialize as empty CSV cells.
#[derive(Debug, Clone)]
pub struct RelativeEnergyReport {
    pub time: f64,
    pub rel_kinetic: f64,
    pub rel_potential: f64,
    pub rel_total: f64,
    pub reduced: Option<f64>,
    pub lhs_rate: Option<f64>,
    pub rhs_value: Option<f64>,
    pub residual: Option<f64>,
    /// Named rate terms (∫A₁ …), where a rate decomposition was computed.
    pub terms: Vec<(String, f64)>,
}

/// Fixed-column CSV for report rows:
/// t, rel_kinetic, rel_potential, rel_total, reduced, lhs_rate, rhs_value,
/// residual, A1..A8 (empty where not applicable).
pub fn reports_to_csv(reports: &[RelativeEnergyReport]) -> String {
    let mut out = String::from(
        "t,rel_kinetic,rel_potential,rel_total,reduced,lhs_rate,rhs_value,residual,A1,A2,A3,A4,A5,A6,A7,A8\n",
    );
    let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in reports {
        let mut row = vec![
            format!("{:e}", r.time),
            format!("{:e}", r.rel_kinetic),
            format!("{:e}", r.rel_potential),
            format!("{:e}", r.rel_total),
            cell(r.reduced),
            cell(r.lhs_rate),
            cell(r.rhs_value),
            cell(r.residual),
        ];
        for i in 1..=8 {
            let name = format!("A{i}");
            row.push(cell(r.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn check_pair(a: &State, b: &State) -> Result<()> {
    if !a.rho.grid().same_as(b.rho.grid()) {
        return Err(FieldError::GridMismatch.into());
    }
    Ok(())
}

fn velocity(s: &State, band_min: f64) -> Result<VectorField> {
    Ok(s.velocity(band_min)?)
}

/// ∫ ½ ρ |m/ρ − m̄/ρ̄|² dx.
pub fn relative_kinetic(s: &State, s_bar: &State, band_min: f64) -> Result<f64> {
    check_pair(s, s_bar)?;
    let w = velocity(s, band_min)?.sub(&velocity(s_bar, band_min)?)?;
    let density = w.magnitude_squared()?.zip(&s.rho, |w2, r| 0.5 * r * w2)?;
    Ok(integrate(&density))
}

/// The same quantity assembled as the Bregman divergence of k(ρ, m) = ½|m|²/ρ:
/// ∫ k(ρ,m) − k(ρ̄,m̄) − ∇k(ρ̄,m̄)·(ρ−ρ̄, m−m̄).
pub fn relative_kinetic_bregman(s: &State, s_bar: &State) -> Result<f64> {
    check_pair(s, s_bar)?;
    let k = s.kinetic_energy()?;
    let k_bar = s_bar.kinetic_energy()?;
    // ∂k/∂ρ(ρ̄, m̄) = −½|m̄|²/ρ̄², ∂k/∂m = m̄/ρ̄
    let m_bar2 = s_bar.m.magnitude_squared()?;
    let dk_drho = m_bar2.zip(&s_bar.rho, |m2, r| -0.5 * m2 / (r * r))?;
    let drho = s.rho.sub(&s_bar.rho)?;
    let mut linear = l2_inner(&dk_drho, &drho)?;
    for a in 0..s.m.dim() {
        let dk_dm = s_bar.m.component(a).zip(&s_bar.rho, |mi, r| mi / r)?;
        let dm = s.m.component(a).sub(s_bar.m.component(a))?;
        linear += l2_inner(&dk_dm, &dm)?;
    }
    Ok(k - k_bar - linear)
}

/// Model-appropriate relative potential energy E(ρ|ρ̄).
pub fn relative_potential(
    model: &EnergyModel,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<f64> {
    model.band.check_field(rho)?;
    model.band.check_field(rho_bar)?;
    match &model.kind {
        ModelKind::Korteweg { .. } | ModelKind::Qhd { .. } => {
            Ok(integrate(&rel::relative_potential_density(model, rho, rho_bar)?))
        }
        ModelKind::EulerPoisson { .. } => {
            let (h_part, indefinite) = euler_poisson_potential_parts(model, rho, rho_bar)?;
            Ok(h_part + indefinite)
        }
        ModelKind::LowerOrder { local, c_kappa, alpha } => {
            let h_rel = rho.zip(rho_bar, |r, rb| rel::rel_h(local, r, rb))?;
            let w = rho.sub(rho_bar)?;
            let gw = helmholtz_inverse(&w, *alpha)?;
            let grad_gw = gradient(&gw)?;
            let diff = w.sub(&gw)?;
            Ok(integrate(&h_rel)
                + 0.5 * c_kappa * alpha * l2_norm(&diff).powi(2)
                + 0.5 * c_kappa * l2_norm_vector(&grad_gw).powi(2))
        }
    }
}

/// Euler–Poisson relative potential split into the convex local part
/// ∫h(ρ|ρ̄) and the sign-indefinite electrostatic part
/// −½∫(ρ−ρ̄)K(ρ−ρ̄) = −½‖∇(c−c̄)‖² − (β/2)‖c−c̄‖², reported separately.
pub fn euler_poisson_potential_parts(
    model: &EnergyModel,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<(f64, f64)> {
    let (local, beta) = match &model.kind {
        ModelKind::EulerPoisson { local, beta } => (local, *beta),
        _ => return Err(RelEnergyError::Unsupported("expected an Euler-Poisson model".into())),
    };
    let h_rel = rho.zip(rho_bar, |r, rb| rel::rel_h(local, r, rb))?;
    let dc = screened_poisson_mean_free(rho, beta)?
        .sub(&screened_poisson_mean_free(rho_bar, beta)?)?;
    let grad_dc = gradient(&dc)?;
    let indefinite = -0.5 * (l2_norm_vector(&grad_dc).powi(2) + beta * l2_norm(&dc).powi(2));
    Ok((integrate(&h_rel), indefinite))
}

/// Bregman route: E(ρ) − E(ρ̄) − ⟨δE/δρ(ρ̄), ρ−ρ̄⟩; must agree with
/// `relative_potential` for every model (the defining identity).
pub fn relative_potential_bregman(
    model: &EnergyModel,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<f64> {
    let e = model.energy_total(rho)?;
    let e_bar = model.energy_total(rho_bar)?;
    let mu_bar = model.variational_derivative(rho_bar)?;
    let drho = rho.sub(rho_bar)?;
    Ok(e - e_bar - l2_inner(&mu_bar, &drho)?)
}

/// Relative total energy = relative potential + relative kinetic.
pub fn relative_total(model: &EnergyModel, s: &State, s_bar: &State) -> Result<f64> {
    Ok(relative_potential(model, &s.rho, &s_bar.rho)? + relative_kinetic(s, s_bar, model.band.min)?)
}

/// Right-hand side of the relative-energy identity (specialized s/r/H or
/// c−c̄ form), including the −ζ∫ρ|u−ū|² friction term.
pub fn identity_rhs(model: &EnergyModel, s: &State, s_bar: &State, zeta: f64) -> Result<f64> {
    check_pair(s, s_bar)?;
    model.band.check_field(&s.rho)?;
    model.band.check_field(&s_bar.rho)?;
    let u_bar = velocity(s_bar, model.band.min)?;
    let grad_u_bar = vector_gradient(&u_bar)?;
    let div_u_bar = divergence(&u_bar)?;
    let w = velocity(s, model.band.min)?.sub(&u_bar)?;

    // convective transport term −∫ρ∇ū : w⊗w and friction
    let ww = TensorField::outer(&w, &w)?;
    let conv = grad_u_bar.contract(&ww)?.mul(&s.rho)?;
    let mut rhs = -integrate(&conv);
    if zeta != 0.0 {
        let fr = w.magnitude_squared()?.mul(&s.rho)?;
        rhs -= zeta * integrate(&fr);
    }

    match &model.kind {
        ModelKind::Korteweg { .. } | ModelKind::Qhd { .. } => {
            let (local, cap) = model.korteweg_parts().expect("korteweg family");
            let d = s.rho.grid().dim();
            let grad = gradient(&s.rho)?;
            let grad_bar = gradient(&s_bar.rho)?;
            let n = s.rho.len();
            let mut s_vals = vec![0.0; n];
            let mut r_vals = vec![vec![0.0; n]; d];
            let mut h_vals = vec![vec![0.0; n]; d * d];
            let mut q = vec![0.0; d];
            let mut qb = vec![0.0; d];
            for idx in 0..n {
                for a in 0..d {
                    q[a] = grad.component(a).values()[idx];
                    qb[a] = grad_bar.component(a).values()[idx];
                }
                let (r, rb) = (s.rho.values()[idx], s_bar.rho.values()[idx]);
                s_vals[idx] = rel::rel_s(local, &cap, r, &q, rb, &qb);
                for (a, rv) in rel::rel_r(&cap, r, &q, rb, &qb).into_iter().enumerate() {
                    r_vals[a][idx] = rv;
                }
                for (ij, hv) in rel::rel_big_h(&cap, r, &q, rb, &qb).into_iter().enumerate() {
                    h_vals[ij][idx] = hv;
                }
            }
            let grid = s.rho.grid().clone();
            let s_rel = ScalarField::from_values(grid.clone(), s_vals)?;
            rhs -= l2_inner(&div_u_bar, &s_rel)?;
            let grad_div_u_bar = gradient(&div_u_bar)?;
            for a in 0..d {
                let r_a = ScalarField::from_values(grid.clone(), r_vals[a].clone())?;
                rhs -= l2_inner(grad_div_u_bar.component(a), &r_a)?;
            }
            for i in 0..d {
                for j in 0..d {
                    let h_ij = ScalarField::from_values(grid.clone(), h_vals[i * d + j].clone())?;
                    rhs -= l2_inner(grad_u_bar.component(i, j), &h_ij)?;
                }
            }
            Ok(rhs)
        }
        ModelKind::EulerPoisson { local, beta } => {
            let dc = screened_poisson_mean_free(&s.rho, *beta)?
                .sub(&screened_poisson_mean_free(&s_bar.rho, *beta)?)?;
            let grad_dc = gradient(&dc)?;
            let mean_diff = mean(&s.rho) - mean(&s_bar.rho);
            let p_rel = s.rho.zip(&s_bar.rho, |r, rb| rel::rel_p(local, r, rb))?;
            let iso = p_rel
                .scale(-1.0)?
                .add(&grad_dc.magnitude_squared()?.scale(0.5)?)?
                .add(&dc.map(|v| 0.5 * beta * v * v)?)?
                .add(&dc.scale(mean_diff)?)?;
            rhs += l2_inner(&div_u_bar, &iso)?;
            let outer = TensorField::outer(&grad_dc, &grad_dc)?;
            rhs -= integrate(&grad_u_bar.contract(&outer)?);
            Ok(rhs)
        }
        ModelKind::LowerOrder { local, c_kappa, alpha } => {
            let dc = helmholtz_inverse(&s.rho, *alpha)?
                .sub(&helmholtz_inverse(&s_bar.rho, *alpha)?)?;
            let grad_dc = gradient(&dc)?;
            let drho = s.rho.sub(&s_bar.rho)?;
            let p_rel = s.rho.zip(&s_bar.rho, |r, rb| rel::rel_p(local, r, rb))?;
            let iso = p_rel
                .scale(-1.0)?
                .add(&drho.map(|v| -0.5 * c_kappa * alpha * v * v)?)?
                .add(&dc.map(|v| 0.5 * c_kappa * alpha * v * v)?)?
                .add(&grad_dc.magnitude_squared()?.scale(0.5 * c_kappa)?)?;
            rhs += l2_inner(&div_u_bar, &iso)?;
            let outer = TensorField::outer(&grad_dc, &grad_dc)?.scale(*c_kappa)?;
            rhs -= integrate(&grad_u_bar.contract(&outer)?);
            Ok(rhs)
        }
    }
}

/// Abstract route: ∫∇ū : S(ρ|ρ̄) − ∫ρ∇ū:w⊗w − ζ∫ρ|w|², with S(ρ|ρ̄)
/// assembled by `relative_stress`. Must agree with `identity_rhs`.
pub fn identity_rhs_abstract(
    model: &EnergyModel,
    s: &State,
    s_bar: &State,
    zeta: f64,
) -> Result<f64> {
    check_pair(s, s_bar)?;
    let u_bar = velocity(s_bar, model.band.min)?;
    let grad_u_bar = vector_gradient(&u_bar)?;
    let w = velocity(s, model.band.min)?.sub(&u_bar)?;
    let s_rel = rel::relative_stress(model, &s.rho, &s_bar.rho)?;
    let mut rhs = integrate(&grad_u_bar.contract(&s_rel)?);
    let ww = TensorField::outer(&w, &w)?;
    rhs -= integrate(&grad_u_bar.contract(&ww)?.mul(&s.rho)?);
    if zeta != 0.0 {
        rhs -= zeta * integrate(&w.magnitude_squared()?.mul(&s.rho)?);
    }
    Ok(rhs)
}

fn check_shared_grid(traj: &Trajectory, traj_bar: &Trajectory) -> Result<f64> {
    if traj.states.len() != traj_bar.states.len() {
        return Err(RelEnergyError::TimeGridMismatch(format!(
            "{} vs {} samples",
            traj.states.len(),
            traj_bar.states.len()
        )));
    }
    if (traj.cadence_dt() - traj_bar.cadence_dt()).abs() > 1e-12 * traj.cadence_dt() {
        return Err(RelEnergyError::TimeGridMismatch("different cadences".into()));
    }
    for (a, b) in traj.states.iter().zip(&traj_bar.states) {
        if (a.time - b.time).abs() > 1e-9 * (1.0 + a.time.abs()) {
            return Err(RelEnergyError::TimeGridMismatch(format!(
                "sample times {} vs {}",
                a.time, b.time
            )));
        }
    }
    Ok(traj.cadence_dt())
}

/// Central-difference d/dt of the relative total energy minus `identity_rhs`
/// along two co-evolved trajectories on a shared time grid.
pub fn identity_residual(
    model: &EnergyModel,
    traj: &Trajectory,
    traj_bar: &Trajectory,
    zeta: f64,
) -> Result<Vec<RelativeEnergyReport>> {
    let tau = check_shared_grid(traj, traj_bar)?;
    let n = traj.states.len();
    let mut totals = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    for (s, s_bar) in traj.states.iter().zip(&traj_bar.states) {
        let kin = relative_kinetic(s, s_bar, model.band.min)?;
        let pot = relative_potential(model, &s.rho, &s_bar.rho)?;
        totals.push(kin + pot);
        reports.push(RelativeEnergyReport {
            time: s.time,
            rel_kinetic: kin,
            rel_potential: pot,
            rel_total: kin + pot,
            reduced: None,
            lhs_rate: None,
            rhs_value: None,
            residual: None,
            terms: Vec::new(),
        });
    }
    for i in 1..n.saturating_sub(1) {
        let lhs = (totals[i + 1] - totals[i - 1]) / (2.0 * tau);
        let rhs = identity_rhs(model, &traj.states[i], &traj_bar.states[i], zeta)?;
        reports[i].lhs_rate = Some(lhs);
        reports[i].rhs_value = Some(rhs);
        reports[i].residual = Some(lhs - rhs);
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Reduced relative energies
// ---------------------------------------------------------------------------

/// Reduced relative energy for the constant-capillarity pair:
/// η_R = (C_κ/2)‖∇(ρ−ρ̄)‖² + ∫½ρ|u−ū|² (the h-part dropped).
pub fn reduced_relative_energy(model: &EnergyModel, s: &State, s_bar: &State) -> Result<f64> {
    let c_kappa = constant_kappa(model)?;
    let drho = s.rho.sub(&s_bar.rho)?;
    let grad = gradient(&drho)?;
    Ok(0.5 * c_kappa * l2_norm_vector(&grad).powi(2)
        + relative_kinetic(s, s_bar, model.band.min)?)
}

fn constant_kappa(model: &EnergyModel) -> Result<f64> {
    match &model.kind {
        ModelKind::Korteweg { cap: Capillarity::Constant { c }, .. } => Ok(*c),
        _ => Err(RelEnergyError::Unsupported(
            "reduced relative energy requires constant capillarity".into(),
        )),
    }
}

/// The three constituents of the lower-order reduced relative energy
/// η_R^α = (C_κ/2)‖∇c^α − ∇ρ‖² + (αC_κ/2)‖ρ^α − c^α‖² + ∫(ρ^α/2)|u − u^α|².
#[derive(Debug, Clone, Copy)]
pub struct LoReducedParts {
    pub grad_term: f64,
    pub penalty_term: f64,
    pub kinetic_term: f64,
}

impl LoReducedParts {
    pub fn total(&self) -> f64 {
        self.grad_term + self.penalty_term + self.kinetic_term
    }
}

/// η_R^α between an NSK state (first) and a lower-order state (second),
/// with c^α = G_α[ρ^α] solved spectrally.
pub fn reduced_relative_energy_lo(
    nsk: &State,
    lo: &State,
    c_kappa: f64,
    alpha: f64,
    band_min: f64,
) -> Result<LoReducedParts> {
    check_pair(nsk, lo)?;
    let c_alpha = helmholtz_inverse(&lo.rho, alpha)?;
    let grad_diff = gradient(&c_alpha.sub(&nsk.rho)?)?;
    let penalty = lo.rho.sub(&c_alpha)?;
    let w = velocity(nsk, band_min)?.sub(&velocity(lo, band_min)?)?;
    let kin = w.magnitude_squared()?.zip(&lo.rho, |w2, r| 0.5 * r * w2)?;
    Ok(LoReducedParts {
        grad_term: 0.5 * c_kappa * l2_norm_vector(&grad_diff).powi(2),
        penalty_term: 0.5 * c_kappa * alpha * l2_norm(&penalty).powi(2),
        kinetic_term: integrate(&kin),
    })
}

/// Full relative energy η^α = ∫h(ρ^α|ρ) + η_R^α between NSK and lower-order
/// states, assembled directly.
pub fn lo_relative_energy(
    nsk: &State,
    lo: &State,
    local: &LocalEnergy,
    c_kappa: f64,
    alpha: f64,
    band_min: f64,
) -> Result<f64> {
    let h_rel = lo.rho.zip(&nsk.rho, |ra, r| rel::rel_h(local, ra, r))?;
    Ok(integrate(&h_rel) + reduced_relative_energy_lo(nsk, lo, c_kappa, alpha, band_min)?.total())
}

/// η_R^α assembled from the separate energy functionals of the two systems
/// (the Bregman-style route); cross-check for `reduced_relative_energy_lo`.
pub fn reduced_relative_energy_lo_via_energies(
    nsk: &State,
    lo: &State,
    local: &LocalEnergy,
    c_kappa: f64,
    alpha: f64,
    band_min: f64,
) -> Result<f64> {
    check_pair(nsk, lo)?;
    let c_alpha = helmholtz_inverse(&lo.rho, alpha)?;
    let grad_c = gradient(&c_alpha)?;
    let grad_rho = gradient(&nsk.rho)?;
    let diff = lo.rho.sub(&c_alpha)?;
    // lower-order potential pieces
    let e_lo = integrate(&lo.rho.map(|r| local.h(r))?)
        + 0.5 * c_kappa * l2_norm_vector(&grad_c).powi(2)
        + 0.5 * c_kappa * alpha * l2_norm(&diff).powi(2);
    // NSK potential pieces
    let e_nsk = integrate(&nsk.rho.map(|r| local.h(r))?)
        + 0.5 * c_kappa * l2_norm_vector(&grad_rho).powi(2);
    // linear pairing ∫ h'(ρ)(ρ^α−ρ) + C_κ ∇ρ·∇(c^α−ρ)
    let drho = lo.rho.sub(&nsk.rho)?;
    let pairing = l2_inner(&nsk.rho.map(|r| local.dh(r))?, &drho)?
        + c_kappa * integrate(&grad_rho.dot(&gradient(&c_alpha.sub(&nsk.rho)?)?)?);
    let w = velocity(nsk, band_min)?.sub(&velocity(lo, band_min)?)?;
    let kin = integrate(&w.magnitude_squared()?.zip(&lo.rho, |w2, r| 0.5 * r * w2)?);
    let eta = e_lo - e_nsk - pairing + kin;
    // η_R^α = η^α − ∫h(ρ^α|ρ)
    let h_rel = integrate(&lo.rho.zip(&nsk.rho, |ra, r| rel::rel_h(local, ra, r))?);
    Ok(eta - h_rel)
}

// ---------------------------------------------------------------------------
// Rate-term decompositions
// ---------------------------------------------------------------------------

/// ∫A₁…∫A₆ for the constant-capillarity Euler–Korteweg twin pair:
/// Σ₁⁴ equals d/dt of the relative energy η, Σ₁⁶ equals d/dt of the reduced
/// relative energy η_R.
#[derive(Debug, Clone, Copy)]
pub struct RateTermsNsk {
    pub a: [f64; 6],
}

impl RateTermsNsk {
    pub fn sum_full(&self) -> f64 {
        self.a[..4].iter().sum()
    }
    pub fn sum_reduced(&self) -> f64 {
        self.a.iter().sum()
    }
    pub fn named(&self) -> Vec<(String, f64)> {
        self.a.iter().enumerate().map(|(i, v)| (format!("A{}", i + 1), *v)).collect()
    }
}

/// Rate terms of the relative / reduced relative energy for two strong
/// solutions of the inviscid constant-κ Euler–Korteweg system; `s` is the
/// perturbed solution, `s_bar` the reference.
pub fn rate_terms_nsk(s: &State, s_bar: &State, model: &EnergyModel) -> Result<RateTermsNsk> {
    check_pair(s, s_bar)?;
    let c_kappa = constant_kappa(model)?;
    let local = model.local();
    let band_min = model.band.min;
    let u = velocity(s, band_min)?;
    let u_bar = velocity(s_bar, band_min)?;
    let w = u.sub(&u_bar)?; // u − ū
    let w_bar_minus = u_bar.sub(&u)?; // ū − u
    let drho_bar = s_bar.rho.sub(&s.rho)?; // ρ̄ − ρ

    // A1 = −C_κ ū·(ρ̄−ρ) ∇Δ(ρ̄−ρ)
    let gl = grad_laplacian(&drho_bar)?;
    let a1 = -c_kappa * integrate(&u_bar.dot(&gl)?.mul(&drho_bar)?);

    // A2 = (ρ/ρ̄)(∇ρ̄·(u−ū))(ū·(u−ū)) + (ū·∇ρ̄/ρ̄) p(ρ|ρ̄)
    let grad_rho_bar = gradient(&s_bar.rho)?;
    let t1 = grad_rho_bar
        .dot(&w)?
        .mul(&u_bar.dot(&w)?)?
        .mul(&s.rho.zip(&s_bar.rho, |r, rb| r / rb)?)?;
    let p_rel = s.rho.zip(&s_bar.rho, |r, rb| rel::rel_p(local, r, rb))?;
    let t2 = u_bar.dot(&grad_rho_bar)?.zip(&s_bar.rho, |v, rb| v / rb)?.mul(&p_rel)?;
    let a2 = integrate(&t1.add(&t2)?);

    // A3 = (1/ρ̄) ∇m̄ : (ρu − ρū) ⊗ (ū − u)
    let grad_m_bar = vector_gradient(&s_bar.m)?;
    let rho_w = w.map_components(|c| c.mul(&s.rho))?;
    let outer = TensorField::outer(&rho_w, &w_bar_minus)?;
    let a3 = integrate(&grad_m_bar.contract(&outer)?.zip(&s_bar.rho, |v, rb| v / rb)?);

    // A4 = −(div m̄/ρ̄) p(ρ|ρ̄)
    let div_m_bar = divergence(&s_bar.m)?;
    let a4 = -integrate(&div_m_bar.zip(&s_bar.rho, |v, rb| v / rb)?.mul(&p_rel)?);

    // A5 = div(m̄)(h′(ρ) − h′(ρ̄) − h″(ρ̄)(ρ−ρ̄))
    let hp_rem = s.rho.zip(&s_bar.rho, |r, rb| {
        local.dh(r) - local.dh(rb) - local.d2h(rb) * (r - rb)
    })?;
    let a5 = integrate(&div_m_bar.mul(&hp_rem)?);

    // A6 = (h′(ρ) − h′(ρ̄))(div m − div m̄)
    let dhp = s.rho.zip(&s_bar.rho, |r, rb| local.dh(r) - local.dh(rb))?;
    let div_m = divergence(&s.m)?;
    let a6 = integrate(&dhp.mul(&div_m.sub(&div_m_bar)?)?);

    Ok(RateTermsNsk { a: [a1, a2, a3, a4, a5, a6] })
}

/// ∫A₁^α…∫A₈^α for the NSK / lower-order pair: Σ₁⁶ equals d/dt∫η^α and
/// Σ₁⁸ equals d/dt∫η_R^α.
#[derive(Debug, Clone, Copy)]
pub struct RateTermsLo {
    pub a: [f64; 8],
}

impl RateTermsLo {
    pub fn sum_full(&self) -> f64 {
        self.a[..6].iter().sum()
    }
    pub fn sum_reduced(&self) -> f64 {
        self.a.iter().sum()
    }
    pub fn named(&self) -> Vec<(String, f64)> {
        self.a.iter().enumerate().map(|(i, v)| (format!("A{}", i + 1), *v)).collect()
    }
}

/// Rate terms between a strong NSK solution (ρ, m) and a strong lower-order
/// solution (ρ^α, m^α), both viscous with the same (λ, μ).
#[allow(clippy::too_many_arguments)]
pub fn rate_terms_lo(
    nsk: &State,
    lo: &State,
    local: &LocalEnergy,
    c_kappa: f64,
    alpha: f64,
    lambda: f64,
    mu: f64,
    band_min: f64,
) -> Result<RateTermsLo> {
    check_pair(nsk, lo)?;
    let u = velocity(nsk, band_min)?;
    let u_alpha = velocity(lo, band_min)?;
    let w = u.sub(&u_alpha)?; // u − u^α
    let c_alpha = helmholtz_inverse(&lo.rho, alpha)?;

    // A1 = (div σ[u]/ρ)·(u−u^α)(ρ^α−ρ) + (u−u^α)·(div σ[u] − div σ[u^α])
    let div_sigma_u = tensor_divergence(&crate::dynamics::viscous_stress(&u, lambda, mu)?)?;
    let div_sigma_ua =
        tensor_divergence(&crate::dynamics::viscous_stress(&u_alpha, lambda, mu)?)?;
    let drho = lo.rho.sub(&nsk.rho)?; // ρ^α − ρ
    let t1 = w.dot(&div_sigma_u)?.mul(&drho)?.zip(&nsk.rho, |v, r| v / r)?;
    let t2 = w.dot(&div_sigma_u.sub(&div_sigma_ua)?)?;
    let a1 = integrate(&t1.add(&t2)?);

    // A2 = −C_κ u·∇Δ(ρ − c^α)(ρ − ρ^α) = C_κ u·∇Δ(ρ − c^α)(ρ^α − ρ)
    let gl = grad_laplacian(&nsk.rho.sub(&c_alpha)?)?;
    let a2 = c_kappa * integrate(&u.dot(&gl)?.mul(&drho)?);

    // A3 = (ρ^α/ρ)(∇ρ·(u−u^α))(u·(u−u^α)) + (u·∇ρ/ρ) p(ρ^α|ρ)
    let grad_rho = gradient(&nsk.rho)?;
    let t1 = grad_rho
        .dot(&w)?
        .mul(&u.dot(&w)?)?
        .mul(&lo.rho.zip(&nsk.rho, |ra, r| ra / r)?)?;
    let p_rel = lo.rho.zip(&nsk.rho, |ra, r| rel::rel_p(local, ra, r))?;
    let t2 = u.dot(&grad_rho)?.zip(&nsk.rho, |v, r| v / r)?.mul(&p_rel)?;
    let a3 = integrate(&t1.add(&t2)?);

    // A4 = (1/ρ) ∇m : (ρ^α u^α − ρ^α u) ⊗ (u − u^α)
    let grad_m = vector_gradient(&nsk.m)?;
    let lhs_vec = w.map_components(|c| c.mul(&lo.rho))?.scale(-1.0)?; // ρ^α(u^α−u)
    let outer = TensorField::outer(&lhs_vec, &w)?;
    let a4 = integrate(&grad_m.contract(&outer)?.zip(&nsk.rho, |v, r| v / r)?);

    // A5 = −(div m/ρ) p(ρ^α|ρ)
    let div_m = divergence(&nsk.m)?;
    let a5 = -integrate(&div_m.zip(&nsk.rho, |v, r| v / r)?.mul(&p_rel)?);

    // A6 = C_κ (c^α_t − ρ^α_t) Δρ with ρ^α_t = −div m^α, c^α_t = G_α[ρ^α_t]
    let div_m_alpha = divergence(&lo.m)?;
    let dt_diff = div_m_alpha.sub(&helmholtz_inverse(&div_m_alpha, alpha)?)?;
    let a6 = c_kappa * l2_inner(&dt_diff, &laplacian(&nsk.rho)?)?;

    // A7 = div(m)(h′(ρ^α) − h′(ρ) − h″(ρ)(ρ^α−ρ))
    let hp_rem = lo.rho.zip(&nsk.rho, |ra, r| {
        local.dh(ra) - local.dh(r) - local.d2h(r) * (ra - r)
    })?;
    let a7 = integrate(&div_m.mul(&hp_rem)?);

    // A8 = (h′(ρ^α) − h′(ρ))(div m^α − div m)
    let dhp = lo.rho.zip(&nsk.rho, |ra, r| local.dh(ra) - local.dh(r))?;
    let a8 = integrate(&dhp.mul(&div_m_alpha.sub(&div_m)?)?);

    Ok(RateTermsLo { a: [a1, a2, a3, a4, a5, a6, a7, a8] })
}

// ---------------------------------------------------------------------------
// Local (pointwise) relative-energy identity and its flux
// ---------------------------------------------------------------------------

/// The relative-energy flux J for the gradient-energy family.
pub fn relative_flux(model: &EnergyModel, s: &State, s_bar: &State) -> Result<VectorField> {
    check_pair(s, s_bar)?;
    let (_, cap) = model.korteweg_parts().ok_or_else(|| {
        RelEnergyError::Unsupported("the local identity is implemented for gradient energies".into())
    })?;
    model.band.check_field(&s.rho)?;
    model.band.check_field(&s_bar.rho)?;
    let grid = s.rho.grid().clone();
    let d = grid.dim();
    let u_bar = velocity(s_bar, model.band.min)?;
    let grad = gradient(&s.rho)?;
    let grad_bar = gradient(&s_bar.rho)?;
    let drho = s.rho.sub(&s_bar.rho)?;
    let grad_drho = grad.sub(&grad_bar)?;

    // variational derivatives μ = F_ρ − div F_q for both states
    let mu = model.variational_derivative(&s.rho)?;
    let mu_bar = model.variational_derivative(&s_bar.rho)?;
    let dmu = mu.sub(&mu_bar)?;

    // F_q = κ(ρ)∇ρ
    let kappa = s.rho.map(|r| cap.kappa(r))?;
    let kappa_bar = s_bar.rho.map(|r| cap.kappa(r))?;
    let fq = grad.map_components(|c| c.mul(&kappa))?;
    let fq_bar = grad_bar.map_components(|c| c.mul(&kappa_bar))?;

    // G = F̄_ρq (ρ−ρ̄) + F̄_qq ∇(ρ−ρ̄) = κ′(ρ̄)∇ρ̄ (ρ−ρ̄) + κ(ρ̄)∇(ρ−ρ̄)
    let dkappa_bar = s_bar.rho.map(|r| cap.dk(r))?;
    let g_vec = grad_bar
        .map_components(|c| c.mul(&dkappa_bar)?.mul(&drho))?
        .add(&grad_drho.map_components(|c| c.mul(&kappa_bar))?)?;

    let div_m = divergence(&s.m)?;
    let div_m_bar = divergence(&s_bar.m)?;
    let div_u_bar = divergence(&u_bar)?;

    // r(·|·)
    let n = grid.len();
    let mut r_vals = vec![vec![0.0; n]; d];
    let mut q = vec![0.0; d];
    let mut qb = vec![0.0; d];
    for idx in 0..n {
        for a in 0..d {
            q[a] = grad.component(a).values()[idx];
            qb[a] = grad_bar.component(a).values()[idx];
        }
        for (a, rv) in rel::rel_r(&cap, s.rho.values()[idx], &q, s_bar.rho.values()[idx], &qb)
            .into_iter()
            .enumerate()
        {
            r_vals[a][idx] = rv;
        }
    }
    let r_rel = VectorField::new(
        grid.clone(),
        r_vals
            .into_iter()
            .map(|v| ScalarField::from_values(grid.clone(), v))
            .collect::<std::result::Result<Vec<_>, _>>()?,
    )?;

    // (S − S̄) ū
    let s_tensor = model.stress_tensor(&s.rho)?;
    let s_tensor_bar = model.stress_tensor(&s_bar.rho)?;
    let ds_ubar = s_tensor.sub(&s_tensor_bar)?.apply(&u_bar)?;

    let ubar_dot_grad_rho_bar = u_bar.dot(&grad_bar)?;
    let ubar_dot_grad_drho = u_bar.dot(&grad_drho)?;
    let div_drho_fqbar = divergence(&fq_bar.map_components(|c| c.mul(&drho))?)?;

    let mut comps = Vec::with_capacity(d);
    for a in 0..d {
        let mut j = s.m.component(a).mul(&dmu)?; // m (μ − μ̄)
        j = j.add(&fq.component(a).sub(fq_bar.component(a))?.mul(&div_m)?)?; // (F_q − F̄_q) div m
        j = j.add(ds_ubar.component(a))?; // (S − S̄) ū
        j = j.sub(&g_vec.component(a).mul(&div_m_bar)?)?; // −G div m̄
        j = j.add(&g_vec.component(a).mul(&ubar_dot_grad_rho_bar)?)?; // +(ū·∇ρ̄) G
        // −[ū div((ρ−ρ̄)F̄_q) − (ū·∇(ρ−ρ̄)) F̄_q]
        j = j.sub(&u_bar.component(a).mul(&div_drho_fqbar)?)?;
        j = j.add(&fq_bar.component(a).mul(&ubar_dot_grad_drho)?)?;
        j = j.sub(&r_rel.component(a).mul(&div_u_bar)?)?; // −div(ū) r(·|·)
        comps.push(j);
    }
    VectorField::new(grid, comps).map_err(Into::into)
}

/// Pointwise residual of the local relative-energy identity at the middle
/// sample of three consecutive co-evolved snapshots (central time difference):
///
/// ∂t(½ρ|w|² + F(·|·)) + ∇·(½m|w|² + J) + ρw⊗w:∇ū + div(ū)s(·|·)
///   + ∇ū:H(·|·) + ∇div(ū)·r(·|·)  →  0.
pub fn local_identity_residual(
    model: &EnergyModel,
    prev: (&State, &State),
    mid: (&State, &State),
    next: (&State, &State),
    tau: f64,
) -> Result<ScalarField> {
    let (local, cap) = model.korteweg_parts().ok_or_else(|| {
        RelEnergyError::Unsupported("the local identity is implemented for gradient energies".into())
    })?;
    let band_min = model.band.min;
    let density = |pair: (&State, &State)| -> Result<ScalarField> {
        let (s, s_bar) = pair;
        let w = velocity(s, band_min)?.sub(&velocity(s_bar, band_min)?)?;
        let kin = w.magnitude_squared()?.zip(&s.rho, |w2, r| 0.5 * r * w2)?;
        let f_rel = rel::relative_potential_density(model, &s.rho, &s_bar.rho)?;
        Ok(kin.add(&f_rel)?)
    };
    let d_prev = density(prev)?;
    let d_next = density(next)?;
    let ddt = d_next.sub(&d_prev)?.scale(1.0 / (2.0 * tau))?;

    let (s, s_bar) = mid;
    let u = velocity(s, band_min)?;
    let u_bar = velocity(s_bar, band_min)?;
    let w = u.sub(&u_bar)?;
    let j = relative_flux(model, s, s_bar)?;
    let half_w2 = w.magnitude_squared()?.scale(0.5)?;
    let kin_flux = s.m.map_components(|c| c.mul(&half_w2))?;
    let div_flux = divergence(&kin_flux.add(&j)?)?;

    // right-hand-side densities
    let grad_u_bar = vector_gradient(&u_bar)?;
    let div_u_bar = divergence(&u_bar)?;
    let grad_div_u_bar = gradient(&div_u_bar)?;
    let ww = TensorField::outer(&w, &w)?;
    let conv = grad_u_bar.contract(&ww)?.mul(&s.rho)?;

    let grid = s.rho.grid().clone();
    let d = grid.dim();
    let n = grid.len();
    let grad = gradient(&s.rho)?;
    let grad_bar = gradient(&s_bar.rho)?;
    let mut s_vals = vec![0.0; n];
    let mut r_vals = vec![vec![0.0; n]; d];
    let mut h_vals = vec![vec![0.0; n]; d * d];
    let mut q = vec![0.0; d];
    let mut qb = vec![0.0; d];
    for idx in 0..n {
        for a in 0..d {
            q[a] = grad.component(a).values()[idx];
            qb[a] = grad_bar.component(a).values()[idx];
        }
        let (r, rb) = (s.rho.values()[idx], s_bar.rho.values()[idx]);
        s_vals[idx] = rel::rel_s(local, &cap, r, &q, rb, &qb);
        for (a, rv) in rel::rel_r(&cap, r, &q, rb, &qb).into_iter().enumerate() {
            r_vals[a][idx] = rv;
        }
        for (ij, hv) in rel::rel_big_h(&cap, r, &q, rb, &qb).into_iter().enumerate() {
            h_vals[ij][idx] = hv;
        }
    }
    let s_rel = ScalarField::from_values(grid.clone(), s_vals)?;
    let mut rhs = conv.scale(-1.0)?.sub(&div_u_bar.mul(&s_rel)?)?;
    for a in 0..d {
        let r_a = ScalarField::from_values(grid.clone(), r_vals[a].clone())?;
        rhs = rhs.sub(&grad_div_u_bar.component(a).mul(&r_a)?)?;
    }
    for i in 0..d {
        for j_idx in 0..d {
            let h_ij = ScalarField::from_values(grid.clone(), h_vals[i * d + j_idx].clone())?;
            rhs = rhs.sub(&grad_u_bar.component(i, j_idx).mul(&h_ij)?)?;
        }
    }

    ddt.add(&div_flux)?.sub(&rhs).map_err(Into::into)
}

/// |∫∇·J| together with ‖J‖_{L²}; periodicity forces the integral to vanish.
pub fn flux_divergence_check(model: &EnergyModel, s: &State, s_bar: &State) -> Result<(f64, f64)> {
    let j = relative_flux(model, s, s_bar)?;
    let div_j = divergence(&j)?;
    Ok((integrate(&div_j).abs(), l2_norm_vector(&j)))
}
