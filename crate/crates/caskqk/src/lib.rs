//! Instanton-corrected hyperkähler and quaternionic-Kähler geometry built
//! from conical affine special Kähler (CASK) domains and mutually local BPS
//! structures.
//!
//! The pipeline runs in four layers:
//!
//! * [`lattice`] — integer symplectic lattice algebra: pairing evaluation,
//!   mutual-locality checks, and Darboux-basis completion for an isotropic
//!   charge support.
//! * [`cask`] — prepotential, τ-matrix, CASK metric data, central charge,
//!   the projective special Kähler quotient and the semi-flat Kähler forms.
//! * [`hk`] — the Bessel-series instanton corrections, the compatibility
//!   tensor, corrected Kähler forms, complex structures and the hyperkähler
//!   metric on the torus fibration over the CASK base, together with the
//!   rotating circle action.
//! * [`bundle`] / [`qk`] — the hyperholomorphic circle bundle, the moment
//!   functions f and f₁, and the quaternionic-Kähler metric produced by the
//!   HK/QK correspondence, both as a global bundle computation and as a
//!   closed-form coordinate expression that deforms the 1-loop
//!   Ferrara-Sabharwal metric.
//!
//! Everything is evaluated pointwise as dense matrices in fixed real charts,
//! so all structural claims (quaternion relations, closedness, metric
//! compatibility, isometries, positivity) can be certified numerically by the
//! verification suites in [`suites`]. Run them through [`cli`] or the
//! `acceptance` integration test.

pub mod bessel;
pub mod bundle;
pub mod cask;
pub mod cli;
pub mod config;
pub mod error;
pub mod forms;
pub mod hk;
pub mod lattice;
pub mod qk;
pub mod report;
pub mod suites;

pub use error::{Error, Result};
