//! Independent brute-force oracles for the test suites: finite-difference
//! Gateaux derivatives, second variations, Taylor-remainder order fits and
//! log-log rate fitting.
//!
//! Trust chain: `gateaux_fd` evaluates the energy functional only, so it can
//! validate variational derivatives; `second_variation_fd` differences a
//! Gateaux pairing only, so it can validate the direct Hessian-form
//! quadrature. Neither ever calls the code path it is checking.

use crate::torus_field::{FieldError, ScalarField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("perturbed state is inadmissible: {0}")]
    Inadmissible(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("nonpositive values are not usable in a log-log fit")]
    NonPositive,
    #[error("xs must be strictly monotone")]
    NotMonotone,
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Least-squares power-law fit in log-log coordinates.
#[derive(Debug, Clone)]
pub struct ConvergenceFit {
    pub xs: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Fit errors ≈ C·xs^slope by least squares on (log x, log err).
pub fn fit_rate(xs: &[f64], errors: &[f64]) -> Result<ConvergenceFit> {
    if xs.len() < 3 || xs.len() != errors.len() {
        return Err(OracleError::TooFewSamples { need: 3, got: xs.len().min(errors.len()) });
    }
    if xs.iter().chain(errors.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(OracleError::NonPositive);
    }
    let increasing = xs.windows(2).all(|w| w[1] > w[0]);
    let decreasing = xs.windows(2).all(|w| w[1] < w[0]);
    if !increasing && !decreasing {
        return Err(OracleError::NotMonotone);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ConvergenceFit { xs: xs.to_vec(), errors: errors.to_vec(), slope, r_squared })
}

/// Central-difference directional derivative (E(ρ+τψ) − E(ρ−τψ)) / 2τ.
pub fn gateaux_fd<E>(energy: E, rho: &ScalarField, psi: &ScalarField, tau: f64) -> Result<f64>
where
    E: Fn(&ScalarField) -> std::result::Result<f64, String>,
{
    let plus = rho.add(&psi.scale(tau)?)?;
    let minus = rho.sub(&psi.scale(tau)?)?;
    let ep = energy(&plus).map_err(OracleError::Inadmissible)?;
    let em = energy(&minus).map_err(OracleError::Inadmissible)?;
    Ok((ep - em) / (2.0 * tau))
}

/// Central difference of a Gateaux pairing ρ ↦ ⟨δE/δρ(ρ), ψ⟩ in direction φ:
/// d²E(ρ; ψ, φ) ≈ (pairing(ρ+εφ) − pairing(ρ−εφ)) / 2ε.
pub fn second_variation_fd<P>(
    pairing: P,
    rho: &ScalarField,
    phi: &ScalarField,
    eps: f64,
) -> Result<f64>
where
    P: Fn(&ScalarField) -> std::result::Result<f64, String>,
{
    let plus = rho.add(&phi.scale(eps)?)?;
    let minus = rho.sub(&phi.scale(eps)?)?;
    let pp = pairing(&plus).map_err(OracleError::Inadmissible)?;
    let pm = pairing(&minus).map_err(OracleError::Inadmissible)?;
    Ok((pp - pm) / (2.0 * eps))
}

/// Fit the decay order of a remainder functional under shrinking perturbation
/// scale; `remainder(scale)` evaluates |g(base + scale·direction | base)|.
pub fn remainder_order<R>(remainder: R, scales: &[f64]) -> Result<ConvergenceFit>
where
    R: Fn(f64) -> std::result::Result<f64, String>,
{
    if scales.len() < 3 {
        return Err(OracleError::TooFewSamples { need: 3, got: scales.len() });
    }
    let mut errs = Vec::with_capacity(scales.len());
    for &s in scales {
        errs.push(remainder(s).map_err(OracleError::Inadmissible)?.abs());
    }
    fit_rate(scales, &errs)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Small-matrix oracle for tests; returns eigenvalues in ascending order.
pub fn jacobi_eigenvalues(mat: &[Vec<f64>]) -> Vec<f64> {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-15 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
