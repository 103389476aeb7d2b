//! Scattering kernels of Schottky groups and their discretizations.
//!
//! The kernel `S(s; x, y) = Σ_γ |γ'(x)|^s / |γx − y|^{2s}` converges for
//! `Re s > 2`; operator-level work runs there (the convergent surrogate,
//! default `s = 3`), while symbol-level quantities use the critical line
//! `Re s = 1`.
//!
//! * [`grid`] — quadrature node grids on the truncated fundamental domain
//!   and their push-forwards.
//! * [`kernel`] — pruned orbit sums, tail bounds and automorphy checks.
//! * [`operator`] — dense kernel matrices, pullbacks, relative operators
//!   and weighted norms.
//! * [`probe`] — principal symbol, probe states and their pairing.
//! * [`experiment`] — the relative-operator pipeline used by sweeps and
//!   rigidity checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kleinian::KleinianError;
use crate::qc::QcError;

pub mod experiment;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod probe;

pub use experiment::{relative_norm, srel_sweep, RelativeConfig, RelativeReport, SweepRow};
pub use grid::NodeGrid;
pub use kernel::{check_automorphy, kernel_remainder, kernel_value, KernelValue, Truncation};
pub use operator::{
    assemble_operator, assemble_remainder, operator_norm, pullback_operator, relative_operator, KernelMatrix,
    NormEstimate, Provenance,
};
pub use probe::{probe_pairing, r_integral, symbol_b0, ProbeKind, ProbeQuadrature, ProbeState};

/// Default convergent surrogate exponent.
pub const DEFAULT_S: f64 = 3.0;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("s = {s} is not in the {required} regime")]
    Regime { s: Complex64, required: &'static str },
    #[error("x = y = {0}: the kernel is singular on the diagonal")]
    DiagonalSingularity(Complex64),
    #[error("point {0} lies outside the reference rectangle")]
    OutsideRect(Complex64),
    #[error("orbit point collides with y (|γx − y| = {0:e})")]
    OrbitCollision(f64),
    #[error("grid mismatch: {0}")]
    NodeMismatch(String),
    #[error("grid is empty or degenerate: {0}")]
    BadGrid(String),
    #[error("power iteration did not converge in {iterations} steps; norm in [{lower:e}, {upper:e}]")]
    NonConvergence { iterations: usize, lower: f64, upper: f64 },
    #[error("probe disk of radius {a} leaves the fundamental domain")]
    ProbeDomain { a: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Kleinian(#[from] KleinianError),
    #[error(transparent)]
    Qc(#[from] QcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a spectral parameter sits relative to the convergence abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `Re s > 2`: the kernel series may be summed directly.
    Convergent,
    /// `Re s = 1`, `s ≠ 1`: symbol-level operations only.
    Critical,
    /// Anything else; no operation accepts it.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam {
    pub s: Complex64,
}

impl SpectralParam {
    pub fn new(s: Complex64) -> Self {
        Self { s }
    }

    pub fn real(s: f64) -> Self {
        Self { s: Complex64::new(s, 0.0) }
    }

    /// `s = 1 + iσ`.
    pub fn critical(sigma: f64) -> Self {
        Self { s: Complex64::new(1.0, sigma) }
    }

    /// `σ = Im s`.
    pub fn sigma(&self) -> f64 {
        self.s.im
    }

    pub fn regime(&self) -> Regime {
        if self.s.re > 2.0 {
            Regime::Convergent
        } else if self.s.re == 1.0 && self.s.im != 0.0 {
            Regime::Critical
        } else {
            Regime::Other
        }
    }

    pub fn require_convergent(&self) -> Result<(), ScatteringError> {
        match self.regime() {
            Regime::Convergent => Ok(()),
            _ => Err(ScatteringError::Regime { s: self.s, required: "convergent (Re s > 2)" }),
        }
    }

    pub fn require_critical(&self) -> Result<(), ScatteringError> {
        match self.regime() {
            Regime::Critical => Ok(()),
            _ => Err(ScatteringError::Regime { s: self.s, required: "critical (Re s = 1, s != 1)" }),
        }
    }
}

/// `q^{-s}` for `q > 0`, with fast paths for real and integer `s`.
#[inline]
pub(crate) fn pow_neg(q: f64, s: Complex64) -> Complex64 {
    if s.im == 0.0 {
        Complex64::new(pow_neg_real(q, s.re), 0.0)
    } else {
        (-s * q.ln()).exp()
    }
}

#[inline]
pub(crate) fn pow_neg_real(q: f64, s: f64) -> f64 {
    if s == 3.0 {
        1.0 / (q * q * q)
    } else if s.fract() == 0.0 && s.abs() < 64.0 {
        q.powi(-(s as i32))
    } else {
        q.powf(-s)
    }
}

/// `J^p` for `J > 0` and complex `p`.
#[inline]
pub(crate) fn pow_real_complex(j: f64, p: Complex64) -> Complex64 {
    if p.im == 0.0 {
        Complex64::new(j.powf(p.re), 0.0)
    } else {
        (p * j.ln()).exp()
    }
}
