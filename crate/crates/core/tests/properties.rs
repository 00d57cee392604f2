//! Property tests for the invariants that hold for *every* admissible input:
//! linearity and exactness of the spectral calculus, contraction of the
//! elliptic inverse, positivity of the kinetic quadratic form, conservation
//! under the flow, and snapshot payload round-trips.

use hydrolab::dynamics::{
    integrate_with, ForceForm, Integrator, State, SystemKind, SystemSpec,
};
use hydrolab::energy_models::{
    kinetic_quadratic_form, relative as rel, Band, Capillarity, EnergyModel, LocalEnergy,
    ModelKind,
};
use hydrolab::torus_field::{
    divergence, gradient, helmholtz_inverse, integrate, l2_norm, l2_norm_vector, linf_norm,
    snapshot, ScalarField, TorusGrid, VectorField,
};
use proptest::prelude::*;
use std::sync::Arc;

fn grid1() -> Arc<TorusGrid> {
    TorusGrid::new(1, 64, 2.0 * std::f64::consts::PI, true).unwrap()
}

/// Band-limited field from explicit (mode, amplitude, phase) triples.
fn field_from_modes(grid: &Arc<TorusGrid>, modes: &[(u8, f64, f64)]) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| {
        modes
            .iter()
            .map(|&(k, a, p)| a * ((k as f64 + 1.0) * x[0] + p).sin())
            .sum()
    })
    .unwrap()
}

fn mode_list() -> impl Strategy<Value = Vec<(u8, f64, f64)>> {
    proptest::collection::vec((0u8..8, -1.0..1.0f64, 0.0..std::f64::consts::TAU), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_is_linear(ma in mode_list(), mb in mode_list(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = grid1();
        let f1 = field_from_modes(&g, &ma);
        let f2 = field_from_modes(&g, &mb);
        let combo = f1.scale(a).unwrap().add(&f2.scale(b).unwrap()).unwrap();
        let lhs = gradient(&combo).unwrap();
        let rhs = gradient(&f1).unwrap().scale(a).unwrap()
            .add(&gradient(&f2).unwrap().scale(b).unwrap()).unwrap();
        let scale = l2_norm_vector(&lhs).max(1.0);
        prop_assert!(l2_norm_vector(&lhs.sub(&rhs).unwrap()) <= 1e-11 * scale);
    }

    #[test]
    fn helmholtz_contracts_and_inverts(modes in mode_list(), alpha in 0.1..1000.0f64) {
        let g = grid1();
        let f = field_from_modes(&g, &modes);
        let c = helmholtz_inverse(&f, alpha).unwrap();
        prop_assert!(l2_norm(&c) <= l2_norm(&f) * (1.0 + 1e-12));
        // (Id − Δ/α) G_α = Id on band-limited fields
        let back = c.sub(&hydrolab::torus_field::laplacian(&c).unwrap()
            .scale(1.0 / alpha).unwrap()).unwrap();
        prop_assert!(linf_norm(&back.sub(&f).unwrap()) <= 1e-11 * linf_norm(&f).max(1e-6));
    }

    #[test]
    fn divergence_integral_vanishes(modes in mode_list()) {
        let g = grid1();
        let v = VectorField::new(g.clone(), vec![field_from_modes(&g, &modes)]).unwrap();
        prop_assert!(integrate(&divergence(&v).unwrap()).abs()
            <= 1e-12 * l2_norm_vector(&v).max(1.0));
    }

    #[test]
    fn taylor_remainders_vanish_at_base(rho in 0.3..3.0f64, q in -2.0..2.0f64) {
        let local = LocalEnergy::GammaLaw { k: 1.0, gamma: 1.4 };
        let cap = Capillarity::Quadratic { a0: 1.0, a2: 0.5 };
        prop_assert!(rel::rel_h(&local, rho, rho).abs() < 1e-13);
        prop_assert!(rel::rel_s(&local, &cap, rho, &[q], rho, &[q]).abs() < 1e-13);
        prop_assert!(rel::rel_big_h(&cap, rho, &[q], rho, &[q])[0].abs() < 1e-13);
    }

    #[test]
    fn kinetic_quadratic_form_nonnegative(
        rho in 0.05..5.0f64,
        m in proptest::collection::vec(-3.0..3.0f64, 1..4),
        a in -2.0..2.0f64,
        b in proptest::collection::vec(-2.0..2.0f64, 1..4),
    ) {
        let d = m.len().min(b.len());
        let q = kinetic_quadratic_form(rho, &m[..d], a, &b[..d]).unwrap();
        prop_assert!(q >= -1e-11);
    }

    #[test]
    fn snapshot_payload_round_trips(values in proptest::collection::vec(-1e12..1e12f64, 0..64)) {
        let bytes = snapshot::encode_field_bytes(&values);
        let back = snapshot::decode_field_bytes("f", values.len(), &bytes).unwrap();
        prop_assert_eq!(back, values);
    }

    // in-process analogues of the fuzz targets: the parsers must reject
    // arbitrary input without panicking
    #[test]
    fn config_parser_never_panics(text in ".*") {
        let _ = hydrolab::config::RunConfig::from_json_str(&text);
    }

    #[test]
    fn snapshot_header_parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        if let Ok(h) = snapshot::SnapshotHeader::parse(&bytes) {
            prop_assert!(h.validate().is_ok());
        }
    }

    #[test]
    fn payload_decoder_never_panics(
        expected in 0usize..512,
        bytes in proptest::collection::vec(any::<u8>(), 0..512),
    ) {
        if let Ok(v) = snapshot::decode_field_bytes("f", expected, &bytes) {
            prop_assert_eq!(v.len(), expected);
        }
    }

    #[test]
    fn mass_and_momentum_conserved_under_flow(
        amp_r in 0.01..0.2f64,
        amp_u in 0.01..0.2f64,
        mode in 1u8..4,
    ) {
        let g = grid1();
        let rho = ScalarField::from_fn(g.clone(), |x| 1.5 + amp_r * ((mode as f64) * x[0]).sin())
            .unwrap();
        let u = ScalarField::from_fn(g.clone(), |x| amp_u * ((mode as f64) * x[0]).cos()).unwrap();
        let m = VectorField::new(g.clone(), vec![u.mul(&rho).unwrap()]).unwrap();
        let s0 = State::new(rho, m, 0.0).unwrap();
        let spec = SystemSpec {
            system: SystemKind::EulerKorteweg,
            model: EnergyModel::new(
                ModelKind::Korteweg {
                    local: LocalEnergy::GammaLaw { k: 1.0, gamma: 2.0 },
                    cap: Capillarity::Constant { c: 0.05 },
                },
                Band::default(),
            )
            .unwrap(),
            zeta: 0.0,
            lambda: 0.0,
            mu: 0.0,
            dt: 1e-3,
            t_end: 0.02,
            integrator: Integrator::Rk4,
            force_form: ForceForm::Conservative,
            cfl_factor: 0.4,
            enforce_cfl: true,
        };
        let mass0 = s0.mass();
        let mom0 = s0.momentum()[0];
        let end = integrate_with(&spec, s0, usize::MAX, |_| Ok(())).unwrap();
        prop_assert!((end.mass() - mass0).abs() <= 1e-10 * mass0.abs());
        prop_assert!((end.momentum()[0] - mom0).abs() <= 1e-10 * mom0.abs().max(1.0));
    }
}
