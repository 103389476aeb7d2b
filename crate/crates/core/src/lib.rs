//! Desk-scale numerics for Schottky groups, their truncated scattering
//! kernels, and the quasiconformal distortion of conjugating maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`moebius`] — normalized `SL(2, C)` arithmetic on the extended plane.
//! * [`kleinian`] — classical Schottky groups built from circle pairings,
//!   reduced-word enumeration and orbital counting.
//! * [`limitset`] — limit-set sampling, box counting and the exponent of
//!   convergence.
//! * [`qc`] — Jacobians, Beltrami coefficients and dilatation of explicit
//!   planar diffeomorphisms.
//! * [`scattering`] — kernel series, discretized operators, principal
//!   symbols and probe-state pairings.
//! * [`bounds`] — the `f_sigma` curve, its inversion, and the dimension
//!   distortion window.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod kleinian;
pub mod limitset;
pub mod moebius;
pub mod qc;
pub mod quad;
pub mod scattering;

pub use num_complex::Complex64;

/// Crate version, embedded in run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
