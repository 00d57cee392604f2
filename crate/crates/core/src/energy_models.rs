//! Potential-energy functionals and their calculus: variational derivatives,
//! pressures, stress tensors, convexity diagnostics.
//!
//! Four families are implemented, all generating dynamics of the form
//! ρ Du/Dt = −ρ∇(δE/δρ):
//!
//! * Korteweg:      E(ρ) = ∫ h(ρ) + ½ κ(ρ)|∇ρ|² dx
//! * QHD:           the Korteweg family with κ(ρ) = ε²/(4ρ)
//! * Euler–Poisson: E(ρ) = ∫ h(ρ) − ½ ρ c dx,  −Δc + βc = ρ − mean(ρ)
//! * Lower-order:   E(ρ) = ∫ h(ρ) + (C_κ α/2)(ρ−c)² + (C_κ/2)|∇c|² dx,
//!                  c − (1/α)Δc = ρ
//!
//! Each family satisfies −ρ∇(δE/δρ) = ∇·S for an explicit stress S, which the
//! tests verify as a spectral residual (translation invariance made concrete).

use crate::torus_field::{
    self as tf, gradient, helmholtz_inverse, integrate, laplacian, mean,
    screened_poisson_mean_free, FieldError, ScalarField, TensorField, VectorField,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod relative;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("density leaves the admissible band [{lo}, {hi}]: min {min}, max {max}")]
    Vacuum { lo: f64, hi: f64, min: f64, max: f64 },
    #[error("scalar density {rho} is not admissible (must be > 0)")]
    NonPositiveDensity { rho: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, EnergyError>;

/// Admissible density band; every pointwise evaluation in ρ is guarded by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Default for Band {
    fn default() -> Self {
        Band { min: 1e-6, max: 1e6 }
    }
}

impl Band {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && max > min) {
            return Err(EnergyError::InvalidModel(format!("bad band [{min}, {max}]")));
        }
        Ok(Band { min, max })
    }

    pub fn check_field(&self, rho: &ScalarField) -> Result<()> {
        let (lo, hi) = (rho.min_value(), rho.max_value());
        if lo < self.min || hi > self.max {
            return Err(EnergyError::Vacuum { lo: self.min, hi: self.max, min: lo, max: hi });
        }
        Ok(())
    }

    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.min && rho <= self.max
    }
}

/// Local internal energy h(ρ) with derivatives up to third order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalEnergy {
    /// h(ρ) = k ρ^γ / (γ−1); the γ-law gas with p(ρ) = k ρ^γ.
    GammaLaw { k: f64, gamma: f64 },
    /// Quartic double well h(ρ) = (ρ−a)²(ρ−b)² + c0·ρ, non-monotone pressure.
    DoubleWell { a: f64, b: f64, c0: f64 },
    /// h(ρ) = a·ρ; pressure-free.
    Linear { a: f64 },
}

impl LocalEnergy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LocalEnergy::GammaLaw { k, gamma } => {
                if !(k > 0.0) || !(gamma > 1.0) {
                    return Err(EnergyError::InvalidModel(format!(
                        "gamma law needs k > 0 and gamma > 1, got k={k}, gamma={gamma}"
                    )));
                }
            }
            LocalEnergy::DoubleWell { a, b, .. } => {
                if !(a < b) {
                    return Err(EnergyError::InvalidModel(format!(
                        "double well needs a < b, got a={a}, b={b}"
                    )));
                }
            }
            LocalEnergy::Linear { .. } => {}
        }
        Ok(())
    }

    pub fn h(&self, rho: f64) -> f64 {
        match *self {
            LocalEnergy::GammaLaw { k, gamma } => k * rho.powf(gamma) / (gamma - 1.0),
            LocalEnergy::DoubleWell { a, b, c0 } => {
                let u = rho - a;
                let v = rho - b;
                u * u * v * v + c0 * rho
            }
            LocalEnergy::Linear { a } => a * rho,
        }
    }

    pub fn dh(&self, rho: f64) -> f64 {
        match *self {
            LocalEnergy::GammaLaw { k, gamma } => k * gamma / (gamma - 1.0) * rho.powf(gamma - 1.0),
            LocalEnergy::DoubleWell { a, b, c0 } => {
                let u = rho - a;
                let v = rho - b;
                2.0 * u * v * (u + v) + c0
            }
            LocalEnergy::Linear { a } => a,
        }
    }

    pub fn d2h(&self, rho: f64) -> f64 {
        match *self {
            LocalEnergy::GammaLaw { k, gamma } => k * gamma * rho.powf(gamma - 2.0),
            LocalEnergy::DoubleWell { a, b, .. } => {
                let u = rho - a;
                let v = rho - b;
                2.0 * ((u + v) * (u + v) + 2.0 * u * v)
            }
            LocalEnergy::Linear { .. } => 0.0,
        }
    }

    pub fn d3h(&self, rho: f64) -> f64 {
        match *self {
            LocalEnergy::GammaLaw { k, gamma } => k * gamma * (gamma - 2.0) * rho.powf(gamma - 3.0),
            LocalEnergy::DoubleWell { a, b, .. } => {
                let u = rho - a;
                let v = rho - b;
                12.0 * (u + v)
            }
            LocalEnergy::Linear { .. } => 0.0,
        }
    }

    /// Pressure from the Gibbs–Duhem relation p = ρ h′(ρ) − h(ρ).
    pub fn pressure(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(EnergyError::NonPositiveDensity { rho });
        }
        Ok(rho * self.dh(rho) - self.h(rho))
    }

    /// p′(ρ) = ρ h″(ρ), by construction.
    pub fn dpressure(&self, rho: f64) -> f64 {
        rho * self.d2h(rho)
    }

    /// p″(ρ) = h″(ρ) + ρ h‴(ρ).
    pub fn d2pressure(&self, rho: f64) -> f64 {
        self.d2h(rho) + rho * self.d3h(rho)
    }
}

/// Capillarity coefficient κ(ρ) of the gradient term ½κ(ρ)|∇ρ|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Capillarity {
    Constant { c: f64 },
    /// κ(ρ) = ε²/(4ρ), the quantum-hydrodynamics capillarity.
    Qhd { eps: f64 },
    /// κ(ρ) = a0 + a2 ρ².
    Quadratic { a0: f64, a2: f64 },
    /// κ(ρ) = c0 (a + b ρ)^s.
    ShiftedPower { c0: f64, a: f64, b: f64, s: f64 },
}

impl Capillarity {
    pub fn kappa(&self, rho: f64) -> f64 {
        match *self {
            Capillarity::Constant { c } => c,
            Capillarity::Qhd { eps } => 0.25 * eps * eps / rho,
            Capillarity::Quadratic { a0, a2 } => a0 + a2 * rho * rho,
            Capillarity::ShiftedPower { c0, a, b, s } => c0 * (a + b * rho).powf(s),
        }
    }

    pub fn dk(&self, rho: f64) -> f64 {
        match *self {
            Capillarity::Constant { .. } => 0.0,
            Capillarity::Qhd { eps } => -0.25 * eps * eps / (rho * rho),
            Capillarity::Quadratic { a2, .. } => 2.0 * a2 * rho,
            Capillarity::ShiftedPower { c0, a, b, s } => c0 * s * b * (a + b * rho).powf(s - 1.0),
        }
    }

    pub fn d2k(&self, rho: f64) -> f64 {
        match *self {
            Capillarity::Constant { .. } => 0.0,
            Capillarity::Qhd { eps } => 0.5 * eps * eps / (rho * rho * rho),
            Capillarity::Quadratic { a2, .. } => 2.0 * a2,
            Capillarity::ShiftedPower { c0, a, b, s } => {
                c0 * s * (s - 1.0) * b * b * (a + b * rho).powf(s - 2.0)
            }
        }
    }

    /// A(ρ) = ½(ρ κ′(ρ) + κ(ρ)), the |q|² coefficient of the stress scalar s.
    pub fn cap_a(&self, rho: f64) -> f64 {
        0.5 * (rho * self.dk(rho) + self.kappa(rho))
    }

    pub fn dcap_a(&self, rho: f64) -> f64 {
        0.5 * (rho * self.d2k(rho) + 2.0 * self.dk(rho))
    }

    /// B(ρ) = ρ κ(ρ), the coefficient of r(ρ, q) = B(ρ) q.
    pub fn cap_b(&self, rho: f64) -> f64 {
        rho * self.kappa(rho)
    }

    pub fn dcap_b(&self, rho: f64) -> f64 {
        self.kappa(rho) + rho * self.dk(rho)
    }
}

/// Tagged union of the implemented energy functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    Korteweg { local: LocalEnergy, cap: Capillarity },
    Qhd { local: LocalEnergy, epsilon: f64 },
    EulerPoisson { local: LocalEnergy, beta: f64 },
    LowerOrder { local: LocalEnergy, c_kappa: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub kind: ModelKind,
    #[serde(default)]
    pub band: Band,
}

impl EnergyModel {
    pub fn new(kind: ModelKind, band: Band) -> Result<Self> {
        let m = EnergyModel { kind, band };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.local().validate()?;
        match &self.kind {
            ModelKind::Qhd { epsilon, .. } => {
                if !(*epsilon > 0.0) {
                    return Err(EnergyError::InvalidModel("qhd needs epsilon > 0".into()));
                }
            }
            ModelKind::EulerPoisson { beta, .. } => {
                if !(*beta >= 0.0) {
                    return Err(EnergyError::InvalidModel("euler-poisson needs beta >= 0".into()));
                }
            }
            ModelKind::LowerOrder { c_kappa, alpha, .. } => {
                if !(*c_kappa > 0.0) || !(*alpha > 0.0) {
                    return Err(EnergyError::InvalidModel(
                        "lower-order needs c_kappa > 0 and alpha > 0".into(),
                    ));
                }
            }
            ModelKind::Korteweg { .. } => {}
        }
        Ok(())
    }

    pub fn local(&self) -> &LocalEnergy {
        match &self.kind {
            ModelKind::Korteweg { local, .. }
            | ModelKind::Qhd { local, .. }
            | ModelKind::EulerPoisson { local, .. }
            | ModelKind::LowerOrder { local, .. } => local,
        }
    }

    /// The (local, κ) pair for the gradient-energy family; QHD maps onto
    /// κ(ρ) = ε²/(4ρ). None for Euler–Poisson / lower-order.
    pub fn korteweg_parts(&self) -> Option<(&LocalEnergy, Capillarity)> {
        match &self.kind {
            ModelKind::Korteweg { local, cap } => Some((local, cap.clone())),
            ModelKind::Qhd { local, epsilon } => {
                Some((local, Capillarity::Qhd { eps: *epsilon }))
            }
            _ => None,
        }
    }

    /// The auxiliary elliptic field c, where the model has one.
    pub fn elliptic_field(&self, rho: &ScalarField) -> Result<Option<ScalarField>> {
        match &self.kind {
            ModelKind::EulerPoisson { beta, .. } => {
                Ok(Some(screened_poisson_mean_free(rho, *beta)?))
            }
            ModelKind::LowerOrder { alpha, .. } => Ok(Some(helmholtz_inverse(rho, *alpha)?)),
            _ => Ok(None),
        }
    }

    /// Total potential energy E(ρ).
    pub fn energy_total(&self, rho: &ScalarField) -> Result<f64> {
        self.band.check_field(rho)?;
        match &self.kind {
            ModelKind::Korteweg { local, cap } => {
                korteweg_energy(local, cap, rho)
            }
            ModelKind::Qhd { local, epsilon } => {
                korteweg_energy(local, &Capillarity::Qhd { eps: *epsilon }, rho)
            }
            ModelKind::EulerPoisson { local, beta } => {
                let c = screened_poisson_mean_free(rho, *beta)?;
                let h = rho.map(|r| local.h(r))?;
                Ok(integrate(&h) - 0.5 * tf::l2_inner(rho, &c)?)
            }
            ModelKind::LowerOrder { .. } => Ok(self.lower_order_energy_forms(rho)?[0]),
        }
    }

    /// The three equivalent forms of the lower-order energy:
    /// [∫h + (C_κα/2)(ρ−c)² + (C_κ/2)|∇c|²,  ∫h + (C_κα/2)ρ² − (C_κα/2)ρc,
    ///  ∫h + (C_κ/2)∇ρ·∇c].
    pub fn lower_order_energy_forms(&self, rho: &ScalarField) -> Result<[f64; 3]> {
        let (local, c_kappa, alpha) = match &self.kind {
            ModelKind::LowerOrder { local, c_kappa, alpha } => (local, *c_kappa, *alpha),
            _ => return Err(EnergyError::InvalidModel("not a lower-order model".into())),
        };
        self.band.check_field(rho)?;
        let c = helmholtz_inverse(rho, alpha)?;
        let h_int = integrate(&rho.map(|r| local.h(r))?);
        let grad_c = gradient(&c)?;
        let diff = rho.sub(&c)?;
        let form1 = h_int
            + 0.5 * c_kappa * alpha * tf::l2_inner(&diff, &diff)?
            + 0.5 * c_kappa * tf::l2_norm_vector(&grad_c).powi(2);
        let form2 = h_int + 0.5 * c_kappa * alpha * (tf::l2_inner(rho, rho)? - tf::l2_inner(rho, &c)?);
        let grad_rho = gradient(rho)?;
        let form3 = h_int + 0.5 * c_kappa * integrate(&grad_rho.dot(&grad_c)?);
        Ok([form1, form2, form3])
    }

    /// Variational derivative δE/δρ on the grid.
    pub fn variational_derivative(&self, rho: &ScalarField) -> Result<ScalarField> {
        self.band.check_field(rho)?;
        match &self.kind {
            ModelKind::Korteweg { local, cap } => korteweg_variational(local, cap, rho),
            ModelKind::Qhd { local, epsilon } => {
                korteweg_variational(local, &Capillarity::Qhd { eps: *epsilon }, rho)
            }
            ModelKind::EulerPoisson { local, beta } => {
                let c = screened_poisson_mean_free(rho, *beta)?;
                Ok(rho.map(|r| local.dh(r))?.sub(&c)?)
            }
            ModelKind::LowerOrder { local, c_kappa, alpha } => {
                let c = helmholtz_inverse(rho, *alpha)?;
                let hp = rho.map(|r| local.dh(r))?;
                Ok(hp.add(&rho.sub(&c)?.scale(c_kappa * alpha)?)?)
            }
        }
    }

    /// Stress tensor S(ρ) with −ρ∇(δE/δρ) = ∇·S.
    pub fn stress_tensor(&self, rho: &ScalarField) -> Result<TensorField> {
        self.band.check_field(rho)?;
        match &self.kind {
            ModelKind::Korteweg { local, cap } => korteweg_stress(local, cap, rho),
            ModelKind::Qhd { local, epsilon } => {
                korteweg_stress(local, &Capillarity::Qhd { eps: *epsilon }, rho)
            }
            ModelKind::EulerPoisson { local, beta } => {
                let c = screened_poisson_mean_free(rho, *beta)?;
                let grad_c = gradient(&c)?;
                let mean_rho = mean(rho);
                let p = rho.map_scalar_fn(local, |l, r| l.pressure(r))?;
                // −(p − ½|∇c|² − (β/2)c² − <ρ>c) I − ∇c⊗∇c
                let gc2 = grad_c.magnitude_squared()?;
                let iso = p
                    .scale(-1.0)?
                    .add(&gc2.scale(0.5)?)?
                    .add(&c.map(|v| 0.5 * beta * v * v)?)?
                    .add(&c.scale(mean_rho)?)?;
                let t = TensorField::isotropic(&iso)?;
                t.sub(&TensorField::outer(&grad_c, &grad_c)?).map_err(Into::into)
            }
            ModelKind::LowerOrder { local, c_kappa, alpha } => {
                let c = helmholtz_inverse(rho, *alpha)?;
                let grad_c = gradient(&c)?;
                let p = rho.map_scalar_fn(local, |l, r| l.pressure(r))?;
                // [−p − C_κ(α/2)ρ² + C_κ(α/2)c² + (C_κ/2)|∇c|²] I − C_κ ∇c⊗∇c
                let gc2 = grad_c.magnitude_squared()?;
                let iso = p
                    .scale(-1.0)?
                    .add(&rho.map(|r| -0.5 * c_kappa * alpha * r * r)?)?
                    .add(&c.map(|v| 0.5 * c_kappa * alpha * v * v)?)?
                    .add(&gc2.scale(0.5 * c_kappa)?)?;
                let t = TensorField::isotropic(&iso)?;
                t.sub(&TensorField::outer(&grad_c, &grad_c)?.scale(*c_kappa)?)
                    .map_err(Into::into)
            }
        }
    }

    /// Pointwise Noether residual field ρ∇(δE/δρ) + ∇·S, which vanishes
    /// analytically for every implemented model.
    pub fn noether_residual(&self, rho: &ScalarField) -> Result<(VectorField, VectorField)> {
        let mu = self.variational_derivative(rho)?;
        let grad_mu = gradient(&mu)?;
        let lhs = grad_mu.map_components(|c| c.mul(rho))?;
        let div_s = tf::tensor_divergence(&self.stress_tensor(rho)?)?;
        let residual = lhs.add(&div_s)?;
        Ok((residual, div_s))
    }
}

// small helper so pressure's Result maps cleanly over a field
trait MapScalarFn {
    fn map_scalar_fn(
        &self,
        local: &LocalEnergy,
        f: impl Fn(&LocalEnergy, f64) -> Result<f64>,
    ) -> Result<ScalarField>;
}

impl MapScalarFn for ScalarField {
    fn map_scalar_fn(
        &self,
        local: &LocalEnergy,
        f: impl Fn(&LocalEnergy, f64) -> Result<f64>,
    ) -> Result<ScalarField> {
        let mut vals = Vec::with_capacity(self.len());
        for &r in self.values() {
            vals.push(f(local, r)?);
        }
        ScalarField::from_values(self.grid().clone(), vals).map_err(Into::into)
    }
}

fn korteweg_energy(local: &LocalEnergy, cap: &Capillarity, rho: &ScalarField) -> Result<f64> {
    let grad = gradient(rho)?;
    let g2 = grad.magnitude_squared()?;
    let density = rho.zip(&g2, |r, q2| local.h(r) + 0.5 * cap.kappa(r) * q2)?;
    Ok(integrate(&density))
}

/// h′(ρ) + ½κ′(ρ)|∇ρ|² − ∇·(κ(ρ)∇ρ)
fn korteweg_variational(
    local: &LocalEnergy,
    cap: &Capillarity,
    rho: &ScalarField,
) -> Result<ScalarField> {
    let grad = gradient(rho)?;
    let g2 = grad.magnitude_squared()?;
    let bulk = rho.zip(&g2, |r, q2| local.dh(r) + 0.5 * cap.dk(r) * q2)?;
    let kappa = rho.map(|r| cap.kappa(r))?;
    let flux = grad.map_components(|c| c.mul(&kappa))?;
    bulk.sub(&tf::divergence(&flux)?).map_err(Into::into)
}

/// [−p − ½(ρκ′+κ)|∇ρ|² + ∇·(ρκ∇ρ)] I − κ ∇ρ⊗∇ρ
fn korteweg_stress(
    local: &LocalEnergy,
    cap: &Capillarity,
    rho: &ScalarField,
) -> Result<TensorField> {
    for &r in rho.values() {
        if !(r > 0.0) {
            return Err(EnergyError::NonPositiveDensity { rho: r });
        }
    }
    let grad = gradient(rho)?;
    let g2 = grad.magnitude_squared()?;
    let iso_bulk = rho.zip(&g2, |r, q2| {
        -(r * local.dh(r) - local.h(r)) - cap.cap_a(r) * q2
    })?;
    let rho_kappa = rho.map(|r| r * cap.kappa(r))?;
    let flux = grad.map_components(|c| c.mul(&rho_kappa))?;
    let iso = iso_bulk.add(&tf::divergence(&flux)?)?;
    let kappa = rho.map(|r| cap.kappa(r))?;
    let mut outer = TensorField::outer(&grad, &grad)?;
    // κ ∇ρ⊗∇ρ
    let d = rho.grid().dim();
    let mut comps = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            comps.push(outer.component(i, j).mul(&kappa)?);
        }
    }
    outer = TensorField::new(rho.grid().clone(), comps)?;
    TensorField::isotropic(&iso)?.sub(&outer).map_err(Into::into)
}

/// Bohm-potential form of the QHD variational derivative,
/// h′(ρ) − (ε²/2) Δ√ρ / √ρ; an independent code path from the general-κ one,
/// used for cross-validation.
pub fn qhd_bohm_variational(
    local: &LocalEnergy,
    epsilon: f64,
    rho: &ScalarField,
) -> Result<ScalarField> {
    for &r in rho.values() {
        if !(r > 0.0) {
            return Err(EnergyError::NonPositiveDensity { rho: r });
        }
    }
    let sqrt_rho = rho.map(f64::sqrt)?;
    let lap = laplacian(&sqrt_rho)?;
    let bohm = lap.zip(&sqrt_rho, |l, s| -0.5 * epsilon * epsilon * l / s)?;
    rho.map(|r| local.dh(r))?.add(&bohm).map_err(Into::into)
}

/// QHD stress assembled directly: (ε²/4)Δρ I − (ε²/(4ρ)) ∇ρ⊗∇ρ − p(ρ) I.
pub fn qhd_stress_direct(
    local: &LocalEnergy,
    epsilon: f64,
    rho: &ScalarField,
) -> Result<TensorField> {
    let e4 = 0.25 * epsilon * epsilon;
    let lap = laplacian(rho)?;
    let p = rho.map_scalar_fn(local, |l, r| l.pressure(r))?;
    let iso = lap.scale(e4)?.sub(&p)?;
    let grad = gradient(rho)?;
    let weighted = grad.map_components(|c| c.zip(rho, |g, r| g * (e4 / r).sqrt()))?;
    // (ε²/4ρ) ∇ρ⊗∇ρ via the weighted outer product
    let outer = TensorField::outer(&weighted, &weighted)?;
    TensorField::isotropic(&iso)?.sub(&outer).map_err(Into::into)
}

/// Direct quadrature of the second-variation bilinear form d²E(ρ; ψ, φ).
///
/// Gradient family: ∫ F_ρρ ψφ + F_ρq·(φ∇ψ + ψ∇φ) + F_qq ∇ψ·∇φ with
/// F_ρρ = h″ + ½κ″|∇ρ|², F_ρq = κ′∇ρ, F_qq = κ I. Euler–Poisson:
/// ∫ h″ψφ − φ K[ψ]. Lower-order: ∫ h″ψφ + C_κα φ(ψ − G_α[ψ]).
pub fn second_variation_quadrature(
    model: &EnergyModel,
    rho: &ScalarField,
    psi: &ScalarField,
    phi: &ScalarField,
) -> Result<f64> {
    model.band.check_field(rho)?;
    match &model.kind {
        ModelKind::Korteweg { .. } | ModelKind::Qhd { .. } => {
            let (local, cap) = model.korteweg_parts().expect("korteweg family");
            let grad_rho = gradient(rho)?;
            let gpsi = gradient(psi)?;
            let gphi = gradient(phi)?;
            let q2 = grad_rho.magnitude_squared()?;
            let f_rr = rho.zip(&q2, |r, qq| local.d2h(r) + 0.5 * cap.d2k(r) * qq)?;
            let mut total = integrate(&f_rr.mul(&psi.mul(phi)?)?);
            let kp = rho.map(|r| cap.dk(r))?;
            total += integrate(&kp.mul(&phi.mul(&grad_rho.dot(&gpsi)?)?)?);
            total += integrate(&kp.mul(&psi.mul(&grad_rho.dot(&gphi)?)?)?);
            let kap = rho.map(|r| cap.kappa(r))?;
            total += integrate(&kap.mul(&gpsi.dot(&gphi)?)?);
            Ok(total)
        }
        ModelKind::EulerPoisson { local, beta } => {
            let h2 = rho.map(|r| local.d2h(r))?;
            let k_psi = screened_poisson_mean_free(psi, *beta)?;
            Ok(integrate(&h2.mul(&psi.mul(phi)?)?) - tf::l2_inner(phi, &k_psi)?)
        }
        ModelKind::LowerOrder { local, c_kappa, alpha } => {
            let h2 = rho.map(|r| local.d2h(r))?;
            let g_psi = helmholtz_inverse(psi, *alpha)?;
            Ok(integrate(&h2.mul(&psi.mul(phi)?)?)
                + c_kappa * alpha * tf::l2_inner(phi, &psi.sub(&g_psi)?)?)
        }
    }
}

// ---------------------------------------------------------------------------
// Convexity diagnostics (hypotheses H4c / H4uc)
// ---------------------------------------------------------------------------

/// Report from sampling the Hessian of F(ρ, q) = h(ρ) + ½κ(ρ)|q|² over a band.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub band: (f64, f64),
    pub q_max: f64,
    pub min_d2h: f64,
    pub min_kappa: f64,
    /// min over the band of κκ″ − 2(κ′)².
    pub min_convexity_condition: f64,
    /// Smallest eigenvalue of ∇²F(ρ, q) over the sampled (ρ, |q|) rectangle.
    pub min_hessian_eigenvalue: f64,
    /// H4c: h″ > 0, κ > 0, κκ″ − 2κ′² ≥ 0.
    pub strictly_convex: bool,
    /// H4uc margins: α₁ = min h″, α₂ = min(κ − 2κ′²/κ″) when κ″ > 0 throughout.
    pub uniformly_convex: bool,
    pub alpha1: f64,
    pub alpha2: Option<f64>,
}

/// Sample h″, κ and the convexity condition over `[band]×[0, q_max]`.
///
/// The Hessian of F in (ρ, q) splits into the 2×2 block
/// [[h″ + ½κ″|q|², κ′|q|], [κ′|q|, κ]] on span{(1,0),(0,q̂)} plus κ on the
/// q̂-orthogonal complement, so its smallest eigenvalue has a closed form.
pub fn check_convexity(
    local: &LocalEnergy,
    cap: &Capillarity,
    band: (f64, f64),
    q_max: f64,
    samples: usize,
) -> Result<ConvexityReport> {
    if !(band.0 > 0.0 && band.1 > band.0) || samples < 2 {
        return Err(EnergyError::InvalidModel("bad convexity sampling request".into()));
    }
    let mut min_d2h = f64::INFINITY;
    let mut min_kappa = f64::INFINITY;
    let mut min_cond = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut min_d2k = f64::INFINITY;
    let mut min_alpha2 = f64::INFINITY;
    for i in 0..samples {
        let rho = band.0 + (band.1 - band.0) * i as f64 / (samples - 1) as f64;
        let (h2, k, k1, k2) = (local.d2h(rho), cap.kappa(rho), cap.dk(rho), cap.d2k(rho));
        min_d2h = min_d2h.min(h2);
        min_kappa = min_kappa.min(k);
        min_cond = min_cond.min(k * k2 - 2.0 * k1 * k1);
        min_d2k = min_d2k.min(k2);
        if k2 > 0.0 {
            min_alpha2 = min_alpha2.min(k - 2.0 * k1 * k1 / k2);
        }
        for j in 0..samples {
            let q = q_max * j as f64 / (samples - 1) as f64;
            let a11 = h2 + 0.5 * k2 * q * q;
            let a12 = k1 * q;
            // eigenvalues of [[a11, a12], [a12, k]]
            let tr = a11 + k;
            let det = a11 * k - a12 * a12;
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let lam = 0.5 * tr - disc;
            min_eig = min_eig.min(lam).min(k);
        }
    }
    let strictly = min_d2h > 0.0 && min_kappa > 0.0 && min_cond >= -1e-14;
    let uniformly = min_d2h > 0.0 && min_d2k > 0.0 && min_alpha2 > 0.0;
    Ok(ConvexityReport {
        band,
        q_max,
        min_d2h,
        min_kappa,
        min_convexity_condition: min_cond,
        min_hessian_eigenvalue: min_eig,
        strictly_convex: strictly,
        uniformly_convex: uniformly,
        alpha1: min_d2h,
        alpha2: if min_d2k > 0.0 { Some(min_alpha2) } else { None },
    })
}

// ---------------------------------------------------------------------------
// Kinetic energy Hessian
// ---------------------------------------------------------------------------

/// Eigenvalues of ∇²k(ρ, m) for k = ½|m|²/ρ: (0, 1/ρ ×(d−1), 1/ρ + |m|²/ρ³).
pub fn kinetic_hessian_eigenvalues(rho: f64, m: &[f64]) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(EnergyError::NonPositiveDensity { rho });
    }
    let d = m.len();
    let m2: f64 = m.iter().map(|v| v * v).sum();
    let mut eig = vec![0.0];
    eig.extend(std::iter::repeat_n(1.0 / rho, d.saturating_sub(1)));
    eig.push(1.0 / rho + m2 / (rho * rho * rho));
    Ok(eig)
}

/// The (d+1)×(d+1) Hessian matrix of k(ρ, m) = ½|m|²/ρ.
pub fn kinetic_hessian_matrix(rho: f64, m: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !(rho > 0.0) {
        return Err(EnergyError::NonPositiveDensity { rho });
    }
    let d = m.len();
    let m2: f64 = m.iter().map(|v| v * v).sum();
    let mut mat = vec![vec![0.0; d + 1]; d + 1];
    mat[0][0] = m2 / rho.powi(3);
    for i in 0..d {
        mat[0][i + 1] = -m[i] / (rho * rho);
        mat[i + 1][0] = -m[i] / (rho * rho);
        mat[i + 1][i + 1] = 1.0 / rho;
    }
    Ok(mat)
}

/// Quadratic form A·∇²k(ρ,m)·A for A = (a, b); equals (1/ρ)|（m/ρ)a − b|².
pub fn kinetic_quadratic_form(rho: f64, m: &[f64], a: f64, b: &[f64]) -> Result<f64> {
    let mat = kinetic_hessian_matrix(rho, m)?;
    let mut v = vec![a];
    v.extend_from_slice(b);
    let mut out = 0.0;
    for (i, vi) in v.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            out += vi * mat[i][j] * vj;
        }
    }
    Ok(out)
}
