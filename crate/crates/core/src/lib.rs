//! hydrolab: a pseudo-spectral laboratory for Euler systems whose dynamics is
//! generated by a potential-energy functional on the periodic torus.
//!
//! The library provides:
//! * [`torus_field`] — periodic grids, spectral calculus, elliptic inverses,
//!   discrete norms and the field snapshot format;
//! * [`energy_models`] — Korteweg / QHD / Euler–Poisson / lower-order energy
//!   functionals with variational derivatives, stress tensors, relative
//!   (Taylor-remainder) functions and convexity diagnostics;
//! * [`dynamics`] — right-hand sides in conservative variables (ρ, m) and
//!   explicit RK4 / SSP-RK3 time stepping;
//! * [`relative_energy`] — relative energies, identity residuals, reduced
//!   relative energies and rate-term decompositions;
//! * [`oracle`] — independent finite-difference and rate-fitting oracles used
//!   by the test suites;
//! * [`config`] / [`experiments`] — the JSON run-config surface and the
//!   experiment drivers behind the `hydrolab` CLI.

pub mod config;
pub mod dynamics;
pub mod energy_models;
pub mod experiments;
pub mod oracle;
pub mod relative_energy;
pub mod torus_field;

pub use energy_models::{Band, Capillarity, EnergyModel, LocalEnergy, ModelKind};
pub use torus_field::{ScalarField, TensorField, TorusGrid, VectorField};
