//! Relative (quadratic Taylor-remainder) functions and the relative stress.
//!
//! For any g, the relative function is
//! g(ρ, q | ρ̄, q̄) = g(ρ,q) − g(ρ̄,q̄) − g_ρ(ρ̄,q̄)(ρ−ρ̄) − g_q(ρ̄,q̄)·(q−q̄),
//! i.e. g minus the linear part of its Taylor expansion around the reference
//! state; these remainders are second-order small and assemble into the
//! relative stress S(ρ|ρ̄) = −s(·|·) I + ∇·r(·|·) I − H(·|·).

use super::{Band, Capillarity, EnergyError, EnergyModel, LocalEnergy, ModelKind, Result};
use crate::torus_field::{
    self as tf, gradient, helmholtz_inverse, mean, screened_poisson_mean_free, ScalarField,
    TensorField, VectorField,
};

/// One-variable Taylor remainder g(x) − g(x̄) − g′(x̄)(x − x̄).
pub fn taylor_remainder(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, x: f64, x_bar: f64) -> f64 {
    g(x) - g(x_bar) - dg(x_bar) * (x - x_bar)
}

/// h(ρ|ρ̄).
pub fn rel_h(local: &LocalEnergy, rho: f64, rho_bar: f64) -> f64 {
    taylor_remainder(|r| local.h(r), |r| local.dh(r), rho, rho_bar)
}

/// p(ρ|ρ̄).
pub fn rel_p(local: &LocalEnergy, rho: f64, rho_bar: f64) -> f64 {
    local.pressure(rho).unwrap_or(f64::NAN) - local.pressure(rho_bar).unwrap_or(f64::NAN)
        - local.dpressure(rho_bar) * (rho - rho_bar)
}

/// κ(ρ|ρ̄).
pub fn rel_kappa(cap: &Capillarity, rho: f64, rho_bar: f64) -> f64 {
    taylor_remainder(|r| cap.kappa(r), |r| cap.dk(r), rho, rho_bar)
}

/// A(ρ|ρ̄) with A = ½(ρκ′ + κ).
pub fn rel_cap_a(cap: &Capillarity, rho: f64, rho_bar: f64) -> f64 {
    taylor_remainder(|r| cap.cap_a(r), |r| cap.dcap_a(r), rho, rho_bar)
}

/// B(ρ|ρ̄) with B = ρκ.
pub fn rel_cap_b(cap: &Capillarity, rho: f64, rho_bar: f64) -> f64 {
    taylor_remainder(|r| cap.cap_b(r), |r| cap.dcap_b(r), rho, rho_bar)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// s(ρ,q|ρ̄,q̄) for s(ρ,q) = p(ρ) + A(ρ)|q|², evaluated from the definition.
pub fn rel_s(
    local: &LocalEnergy,
    cap: &Capillarity,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> f64 {
    let s = |r: f64, qq: &[f64]| local.pressure(r).unwrap_or(f64::NAN) + cap.cap_a(r) * norm_sq(qq);
    let s_rho = local.dpressure(rho_bar) + cap.dcap_a(rho_bar) * norm_sq(q_bar);
    let dq: Vec<f64> = q.iter().zip(q_bar).map(|(a, b)| a - b).collect();
    s(rho, q) - s(rho_bar, q_bar) - s_rho * (rho - rho_bar) - 2.0 * cap.cap_a(rho_bar) * dot(q_bar, &dq)
}

/// Closed algebraic form of s(·|·):
/// p(ρ|ρ̄) + A(ρ|ρ̄)|q̄|² + A(ρ)|q−q̄|² + 2(A(ρ)−A(ρ̄)) q̄·(q−q̄).
pub fn rel_s_closed(
    local: &LocalEnergy,
    cap: &Capillarity,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> f64 {
    let dq: Vec<f64> = q.iter().zip(q_bar).map(|(a, b)| a - b).collect();
    rel_p(local, rho, rho_bar)
        + rel_cap_a(cap, rho, rho_bar) * norm_sq(q_bar)
        + cap.cap_a(rho) * norm_sq(&dq)
        + 2.0 * (cap.cap_a(rho) - cap.cap_a(rho_bar)) * dot(q_bar, &dq)
}

/// r(ρ,q|ρ̄,q̄) for r = B(ρ) q, from the definition.
pub fn rel_r(cap: &Capillarity, rho: f64, q: &[f64], rho_bar: f64, q_bar: &[f64]) -> Vec<f64> {
    (0..q.len())
        .map(|k| {
            cap.cap_b(rho) * q[k]
                - cap.cap_b(rho_bar) * q_bar[k]
                - cap.dcap_b(rho_bar) * q_bar[k] * (rho - rho_bar)
                - cap.cap_b(rho_bar) * (q[k] - q_bar[k])
        })
        .collect()
}

/// Closed form r(·|·) = B(ρ|ρ̄) q̄ + (B(ρ)−B(ρ̄))(q − q̄).
pub fn rel_r_closed(cap: &Capillarity, rho: f64, q: &[f64], rho_bar: f64, q_bar: &[f64]) -> Vec<f64> {
    let b_rel = rel_cap_b(cap, rho, rho_bar);
    let db = cap.cap_b(rho) - cap.cap_b(rho_bar);
    (0..q.len()).map(|k| b_rel * q_bar[k] + db * (q[k] - q_bar[k])).collect()
}

/// H(ρ,q|ρ̄,q̄) for H = κ(ρ) q⊗q, from the definition; row-major d×d.
pub fn rel_big_h(
    cap: &Capillarity,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> Vec<f64> {
    let d = q.len();
    let mut out = vec![0.0; d * d];
    let (k, kb, kb1) = (cap.kappa(rho), cap.kappa(rho_bar), cap.dk(rho_bar));
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = k * q[i] * q[j]
                - kb * q_bar[i] * q_bar[j]
                - kb1 * q_bar[i] * q_bar[j] * (rho - rho_bar)
                - kb * (q_bar[j] * (q[i] - q_bar[i]) + q_bar[i] * (q[j] - q_bar[j]));
        }
    }
    out
}

/// Closed form H(·|·) = κ(ρ)(q−q̄)⊗(q−q̄) + κ(ρ|ρ̄) q̄⊗q̄
/// + (κ(ρ)−κ(ρ̄)) [q̄⊗(q−q̄) + (q−q̄)⊗q̄].
pub fn rel_big_h_closed(
    cap: &Capillarity,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> Vec<f64> {
    let d = q.len();
    let dq: Vec<f64> = q.iter().zip(q_bar).map(|(a, b)| a - b).collect();
    let k = cap.kappa(rho);
    let k_rel = rel_kappa(cap, rho, rho_bar);
    let dk = cap.kappa(rho) - cap.kappa(rho_bar);
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = k * dq[i] * dq[j]
                + k_rel * q_bar[i] * q_bar[j]
                + dk * (q_bar[i] * dq[j] + dq[i] * q_bar[j]);
        }
    }
    out
}

/// F(ρ,q|ρ̄,q̄) for F = h(ρ) + ½κ(ρ)|q|², the relative potential density.
pub fn rel_f(
    local: &LocalEnergy,
    cap: &Capillarity,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> f64 {
    let dq: Vec<f64> = q.iter().zip(q_bar).map(|(a, b)| a - b).collect();
    rel_h(local, rho, rho_bar)
        + 0.5 * cap.kappa(rho) * norm_sq(q)
        - 0.5 * cap.kappa(rho_bar) * norm_sq(q_bar)
        - 0.5 * cap.dk(rho_bar) * norm_sq(q_bar) * (rho - rho_bar)
        - cap.kappa(rho_bar) * dot(q_bar, &dq)
}

/// Selector for the spec-level `relative_scalar` operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativeFunction {
    LocalH,
    Pressure,
    StressS,
    Kappa,
    CapA,
    CapB,
}

/// Pointwise relative function of the requested kind.
pub fn relative_scalar(
    local: &LocalEnergy,
    cap: &Capillarity,
    which: RelativeFunction,
    rho: f64,
    q: &[f64],
    rho_bar: f64,
    q_bar: &[f64],
) -> f64 {
    match which {
        RelativeFunction::LocalH => rel_h(local, rho, rho_bar),
        RelativeFunction::Pressure => rel_p(local, rho, rho_bar),
        RelativeFunction::StressS => rel_s(local, cap, rho, q, rho_bar, q_bar),
        RelativeFunction::Kappa => rel_kappa(cap, rho, rho_bar),
        RelativeFunction::CapA => rel_cap_a(cap, rho, rho_bar),
        RelativeFunction::CapB => rel_cap_b(cap, rho, rho_bar),
    }
}

/// Field lift of `relative_scalar` with q = ∇ρ, q̄ = ∇ρ̄ (spectral).
pub fn relative_scalar_field(
    local: &LocalEnergy,
    cap: &Capillarity,
    which: RelativeFunction,
    band: &Band,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<ScalarField> {
    band.check_field(rho)?;
    band.check_field(rho_bar)?;
    let d = rho.grid().dim();
    let grad = gradient(rho)?;
    let grad_bar = gradient(rho_bar)?;
    let mut vals = Vec::with_capacity(rho.len());
    let mut q = vec![0.0; d];
    let mut qb = vec![0.0; d];
    for idx in 0..rho.len() {
        for a in 0..d {
            q[a] = grad.component(a).values()[idx];
            qb[a] = grad_bar.component(a).values()[idx];
        }
        vals.push(relative_scalar(
            local,
            cap,
            which,
            rho.values()[idx],
            &q,
            rho_bar.values()[idx],
            &qb,
        ));
    }
    ScalarField::from_values(rho.grid().clone(), vals).map_err(Into::into)
}

/// Pointwise relative potential density field for any model; for the
/// Korteweg family this is F(ρ,∇ρ|ρ̄,∇ρ̄).
pub fn relative_potential_density(
    model: &EnergyModel,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<ScalarField> {
    model.band.check_field(rho)?;
    model.band.check_field(rho_bar)?;
    let (local, cap) = model
        .korteweg_parts()
        .ok_or_else(|| EnergyError::InvalidModel("relative potential density needs a gradient-energy model".into()))?;
    let d = rho.grid().dim();
    let grad = gradient(rho)?;
    let grad_bar = gradient(rho_bar)?;
    let mut vals = Vec::with_capacity(rho.len());
    let mut q = vec![0.0; d];
    let mut qb = vec![0.0; d];
    for idx in 0..rho.len() {
        for a in 0..d {
            q[a] = grad.component(a).values()[idx];
            qb[a] = grad_bar.component(a).values()[idx];
        }
        vals.push(rel_f(local, &cap, rho.values()[idx], &q, rho_bar.values()[idx], &qb));
    }
    ScalarField::from_values(rho.grid().clone(), vals).map_err(Into::into)
}

/// Relative stress tensor S(ρ|ρ̄) on the grid.
///
/// Korteweg family: −s(·|·) I + (∇·r(·|·)) I − H(·|·) with the remainders
/// evaluated pointwise and the divergence spectral. Euler–Poisson and
/// lower-order: the closed forms in terms of c − c̄.
pub fn relative_stress(
    model: &EnergyModel,
    rho: &ScalarField,
    rho_bar: &ScalarField,
) -> Result<TensorField> {
    model.band.check_field(rho)?;
    model.band.check_field(rho_bar)?;
    let grid = rho.grid().clone();
    let d = grid.dim();
    match &model.kind {
        ModelKind::Korteweg { .. } | ModelKind::Qhd { .. } => {
            let (local, cap) = model.korteweg_parts().expect("korteweg family");
            let grad = gradient(rho)?;
            let grad_bar = gradient(rho_bar)?;
            let n = rho.len();
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
                let (r, rb) = (rho.values()[idx], rho_bar.values()[idx]);
                s_vals[idx] = rel_s(local, &cap, r, &q, rb, &qb);
                for (a, rv) in rel_r(&cap, r, &q, rb, &qb).into_iter().enumerate() {
                    r_vals[a][idx] = rv;
                }
                for (ij, hv) in rel_big_h(&cap, r, &q, rb, &qb).into_iter().enumerate() {
                    h_vals[ij][idx] = hv;
                }
            }
            let s_field = ScalarField::from_values(grid.clone(), s_vals)?;
            let r_field = VectorField::new(
                grid.clone(),
                r_vals
                    .into_iter()
                    .map(|v| ScalarField::from_values(grid.clone(), v))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            )?;
            let div_r = tf::divergence(&r_field)?;
            let iso = div_r.sub(&s_field)?;
            let mut comps = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    let mut c = ScalarField::from_values(grid.clone(), h_vals[i * d + j].clone())?
                        .scale(-1.0)?;
                    if i == j {
                        c = c.add(&iso)?;
                    }
                    comps.push(c);
                }
            }
            TensorField::new(grid, comps).map_err(Into::into)
        }
        ModelKind::EulerPoisson { local, beta } => {
            let c = screened_poisson_mean_free(rho, *beta)?;
            let c_bar = screened_poisson_mean_free(rho_bar, *beta)?;
            let dc = c.sub(&c_bar)?;
            let grad_dc = gradient(&dc)?;
            let mean_diff = mean(rho) - mean(rho_bar);
            let p_rel = rho.zip(rho_bar, |r, rb| rel_p(local, r, rb))?;
            let iso = p_rel
                .scale(-1.0)?
                .add(&grad_dc.magnitude_squared()?.scale(0.5)?)?
                .add(&dc.map(|v| 0.5 * beta * v * v)?)?
                .add(&dc.scale(mean_diff)?)?;
            TensorField::isotropic(&iso)?
                .sub(&TensorField::outer(&grad_dc, &grad_dc)?)
                .map_err(Into::into)
        }
        ModelKind::LowerOrder { local, c_kappa, alpha } => {
            let c = helmholtz_inverse(rho, *alpha)?;
            let c_bar = helmholtz_inverse(rho_bar, *alpha)?;
            let dc = c.sub(&c_bar)?;
            let grad_dc = gradient(&dc)?;
            let p_rel = rho.zip(rho_bar, |r, rb| rel_p(local, r, rb))?;
            let drho = rho.sub(rho_bar)?;
            let iso = p_rel
                .scale(-1.0)?
                .add(&drho.map(|w| -0.5 * c_kappa * alpha * w * w)?)?
                .add(&dc.map(|v| 0.5 * c_kappa * alpha * v * v)?)?
                .add(&grad_dc.magnitude_squared()?.scale(0.5 * c_kappa)?)?;
            TensorField::isotropic(&iso)?
                .sub(&TensorField::outer(&grad_dc, &grad_dc)?.scale(*c_kappa)?)
                .map_err(Into::into)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::torus_field::{linf_norm, TorusGrid};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn grid1(n: usize) -> Arc<TorusGrid> {
        TorusGrid::new(1, n, 2.0 * std::f64::consts::PI, true).unwrap()
    }

    fn gamma2() -> LocalEnergy {
        LocalEnergy::GammaLaw { k: 1.0, gamma: 2.0 }
    }

    #[test]
    fn remainder_vanishes_at_base_point() {
        let local = LocalEnergy::DoubleWell { a: 1.0, b: 2.0, c0: 0.3 };
        let cap = Capillarity::Quadratic { a0: 1.0, a2: 0.5 };
        let q = [0.7, -0.2];
        for which in [
            RelativeFunction::LocalH,
            RelativeFunction::Pressure,
            RelativeFunction::StressS,
            RelativeFunction::Kappa,
            RelativeFunction::CapA,
            RelativeFunction::CapB,
        ] {
            let v = relative_scalar(&local, &cap, which, 1.3, &q, 1.3, &q);
            assert!(v.abs() < 1e-14, "{which:?}: {v}");
        }
        let r = rel_r(&cap, 1.3, &q, 1.3, &q);
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let h = rel_big_h(&cap, 1.3, &q, 1.3, &q);
        assert!(h.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gamma_two_h_remainder_is_squared_difference() {
        let local = gamma2(); // h = ρ²
        for (rho, rho_bar) in [(1.5, 1.0), (0.3, 2.0), (4.0, 3.9)] {
            let expect = (rho - rho_bar) * (rho - rho_bar);
            assert_relative_eq!(rel_h(&local, rho, rho_bar), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn closed_forms_match_generic_remainders() {
        let local = LocalEnergy::GammaLaw { k: 0.8, gamma: 1.4 };
        let mut worst = 0.0f64;
        for cap in [
            Capillarity::Constant { c: 0.4 },
            Capillarity::Qhd { eps: 0.5 },
            Capillarity::Quadratic { a0: 1.0, a2: 1.0 },
        ] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
            for _ in 0..200 {
                let r = rand::Rng::gen_range(&mut rng, 0.5..2.5);
                let rb = rand::Rng::gen_range(&mut rng, 0.5..2.5);
                let q: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
                let qb: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
                let a = rel_s(&local, &cap, r, &q, rb, &qb);
                let b = rel_s_closed(&local, &cap, r, &q, rb, &qb);
                worst = worst.max((a - b).abs());
                for (x, y) in rel_r(&cap, r, &q, rb, &qb).iter().zip(rel_r_closed(&cap, r, &q, rb, &qb)) {
                    worst = worst.max((x - y).abs());
                }
                for (x, y) in rel_big_h(&cap, r, &q, rb, &qb)
                    .iter()
                    .zip(rel_big_h_closed(&cap, r, &q, rb, &qb))
                {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        assert!(worst <= 1e-12, "worst mismatch {worst}");
    }

    #[test]
    fn constant_kappa_relative_functions_hand_forms() {
        // s(·|·) = p(ρ|ρ̄) + (C_κ/2)|q−q̄|², r(·|·) = C_κ(ρ−ρ̄)(q−q̄),
        // H(·|·) = C_κ (q−q̄)⊗(q−q̄)
        let local = gamma2();
        let ck = 0.7;
        let cap = Capillarity::Constant { c: ck };
        let (r, rb) = (1.6, 1.1);
        let q = [0.9];
        let qb = [-0.4];
        let dq = q[0] - qb[0];
        assert_relative_eq!(
            rel_s(&local, &cap, r, &q, rb, &qb),
            rel_p(&local, r, rb) + 0.5 * ck * dq * dq,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            rel_r(&cap, r, &q, rb, &qb)[0],
            ck * (r - rb) * dq,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            rel_big_h(&cap, r, &q, rb, &qb)[0],
            ck * dq * dq,
            max_relative = 1e-13
        );
    }

    #[test]
    fn qhd_relative_h_velocity_form() {
        // H(·|·) = (ε²/4) ρ (q/ρ − q̄/ρ̄) ⊗ (q/ρ − q̄/ρ̄)
        let eps = 0.7;
        let cap = Capillarity::Qhd { eps };
        let (r, rb) = (1.8, 0.9);
        let q = [1.3, -0.5];
        let qb = [0.2, 0.8];
        let got = rel_big_h(&cap, r, &q, rb, &qb);
        for i in 0..2 {
            for j in 0..2 {
                let wi = q[i] / r - qb[i] / rb;
                let wj = q[j] / r - qb[j] / rb;
                let expect = 0.25 * eps * eps * r * wi * wj;
                assert_relative_eq!(got[i * 2 + j], expect, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn remainders_are_second_order_small() {
        let local = LocalEnergy::GammaLaw { k: 1.0, gamma: 3.0 };
        let cap = Capillarity::Quadratic { a0: 1.0, a2: 1.0 };
        let base = (1.4, [0.6, -0.3]);
        let dir = (0.8, [-0.5, 0.9]);
        let scales = [1e-2, 3e-3, 1e-3, 3e-4];
        // h with γ=3
        let fit = oracle::remainder_order(
            |s| Ok(rel_h(&local, base.0 + s * dir.0, base.0)),
            &scales,
        )
        .unwrap();
        assert!(fit.slope > 1.9 && fit.slope < 2.1, "h slope {}", fit.slope);
        // s, variable κ
        let fit = oracle::remainder_order(
            |s| {
                let r = base.0 + s * dir.0;
                let q = [base.1[0] + s * dir.1[0], base.1[1] + s * dir.1[1]];
                Ok(rel_s(&local, &cap, r, &q, base.0, &base.1))
            },
            &scales,
        )
        .unwrap();
        assert!(fit.slope > 1.9 && fit.slope < 2.1, "s slope {}", fit.slope);
        // an H component, variable κ
        let fit = oracle::remainder_order(
            |s| {
                let r = base.0 + s * dir.0;
                let q = [base.1[0] + s * dir.1[0], base.1[1] + s * dir.1[1]];
                Ok(rel_big_h(&cap, r, &q, base.0, &base.1)[1])
            },
            &scales,
        )
        .unwrap();
        assert!(fit.slope > 1.9 && fit.slope < 2.1, "H slope {}", fit.slope);
    }

    #[test]
    fn halving_perturbation_quarters_remainder() {
        let local = gamma2();
        let cap = Capillarity::Qhd { eps: 0.5 };
        let base = (1.2, [0.4]);
        let dir = (0.6, [-0.7]);
        let eval = |s: f64| {
            let r = base.0 + s * dir.0;
            let q = [base.1[0] + s * dir.1[0]];
            rel_f(&local, &cap, r, &q, base.0, &base.1)
        };
        let ratio = eval(0.1) / eval(0.05);
        assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn relative_stress_vanishes_at_equal_states() {
        let g = grid1(64);
        let rho = ScalarField::from_fn(g, |x| 1.2 + 0.2 * x[0].sin()).unwrap();
        for kind in [
            ModelKind::Korteweg { local: gamma2(), cap: Capillarity::Quadratic { a0: 1.0, a2: 1.0 } },
            ModelKind::Qhd { local: gamma2(), epsilon: 0.5 },
            ModelKind::EulerPoisson { local: gamma2(), beta: 1.0 },
            ModelKind::LowerOrder { local: gamma2(), c_kappa: 0.01, alpha: 50.0 },
        ] {
            let m = EnergyModel::new(kind, Band::default()).unwrap();
            let s = relative_stress(&m, &rho, &rho).unwrap();
            let d = s.dim();
            for i in 0..d {
                for j in 0..d {
                    assert!(linf_norm(s.component(i, j)) < 1e-11);
                }
            }
        }
    }

    #[test]
    fn relative_stress_constant_kappa_matches_hand_assembly() {
        let g = grid1(128);
        let ck = 0.3;
        let m = EnergyModel::new(
            ModelKind::Korteweg { local: gamma2(), cap: Capillarity::Constant { c: ck } },
            Band::default(),
        )
        .unwrap();
        let rho = ScalarField::from_fn(g.clone(), |x| 1.5 + 0.2 * x[0].sin()).unwrap();
        let rho_bar = ScalarField::from_fn(g.clone(), |x| 1.4 + 0.1 * (2.0 * x[0]).cos()).unwrap();
        let s = relative_stress(&m, &rho, &rho_bar).unwrap();

        // hand assembly from the constant-κ relative functions
        let local = gamma2();
        let grad = gradient(&rho).unwrap();
        let grad_bar = gradient(&rho_bar).unwrap();
        let dq = grad.sub(&grad_bar).unwrap();
        let drho = rho.sub(&rho_bar).unwrap();
        let s_rel = rho
            .zip(&rho_bar, |r, rb| rel_p(&local, r, rb))
            .unwrap()
            .add(&dq.magnitude_squared().unwrap().scale(0.5 * ck).unwrap())
            .unwrap();
        let r_rel = dq.map_components(|c| c.mul(&drho).unwrap().scale(ck)).unwrap();
        let h_rel = TensorField::outer(&dq, &dq).unwrap().scale(ck).unwrap();
        let iso = tf::divergence(&r_rel).unwrap().sub(&s_rel).unwrap();
        let expect = TensorField::isotropic(&iso).unwrap().sub(&h_rel).unwrap();
        let diff = s.sub(&expect).unwrap();
        assert!(linf_norm(diff.component(0, 0)) <= 1e-12);
    }

    #[test]
    fn relative_stress_second_order_smallness() {
        let g = grid1(64);
        let m = EnergyModel::new(
            ModelKind::Korteweg { local: gamma2(), cap: Capillarity::Quadratic { a0: 1.0, a2: 1.0 } },
            Band::default(),
        )
        .unwrap();
        let rho_bar = ScalarField::from_fn(g.clone(), |x| 1.5 + 0.2 * x[0].sin()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let dir = tf::random_band_limited(&g, 5, 1.0, &mut rng).unwrap();
        let eval = |s: f64| -> std::result::Result<f64, String> {
            let rho = rho_bar.add(&dir.scale(s).unwrap()).unwrap();
            let t = relative_stress(&m, &rho, &rho_bar).map_err(|e| e.to_string())?;
            Ok(linf_norm(t.component(0, 0)))
        };
        let fit = oracle::remainder_order(eval, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(fit.slope > 1.9 && fit.slope < 2.1, "slope {}", fit.slope);
    }

    #[test]
    fn relative_scalar_field_lift_matches_pointwise() {
        let g = grid1(64);
        let local = gamma2();
        let cap = Capillarity::Constant { c: 1.0 };
        let rho = ScalarField::from_fn(g.clone(), |x| 1.5 + 0.3 * x[0].sin()).unwrap();
        let rho_bar = ScalarField::constant(g, 1.5).unwrap();
        let f = relative_scalar_field(
            &local,
            &cap,
            RelativeFunction::LocalH,
            &Band::default(),
            &rho,
            &rho_bar,
        )
        .unwrap();
        for (i, &v) in f.values().iter().enumerate() {
            let expect = (rho.values()[i] - 1.5) * (rho.values()[i] - 1.5);
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
