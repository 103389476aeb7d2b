//! Principal symbol of the relative operator and the probe-state pairing.
//!
//! With `A(x)` the unimodular distortion matrix of `ψ`, the symbol is
//! `b₀(x, ξ) = 1 − cos(σ ln |A(x)ξ|²)` for unit `ξ`. The pairing of the
//! step probe (radius `a`) with `B₀` applied to the Gaussian probe reduces,
//! after the Fourier transform of the Gaussian, to
//! `(1/2π²) ∫_{|x|<a} ∫_{|η|=1} b₀(x, η) ∫₀^{12/a} r cos(r x·η) e^{−a²r²/2} dr dη dx`.
//! For constant `A` this factors as `I·f_σ(λ)/(2π²)` with
//! `I = a² ∫_{|u|<1} r_integral(u·η) du ≥ π a²/4` after scaling by `a²`,
//! where the `a²` cancels against the probe normalizations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::NodeGrid;
use super::ScatteringError;
use crate::kleinian::SchottkyGroup;
use crate::qc::{apply2, DiffeoField};
use crate::quad::{adaptive_simpson, GaussLegendre};

/// Upper limit of the scaled radial integral.
pub const R_CUTOFF: f64 = 12.0;
pub const R_TOL: f64 = 1e-10;

/// `b₀(z, ξ)` for a unit vector `ξ = (ξ₁, ξ₂)`.
pub fn symbol_b0(psi: &DiffeoField, sigma: f64, z: Complex64, xi: [f64; 2]) -> Result<f64, ScatteringError> {
    let len = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    if (len - 1.0).abs() > 1e-12 {
        return Err(ScatteringError::InvalidArgument(format!("|ξ| = {len} is not 1")));
    }
    let a = psi.distortion_matrix(z)?;
    Ok(b0_from(&a, sigma, xi))
}

#[inline]
fn b0_from(a: &crate::qc::Mat2, sigma: f64, xi: [f64; 2]) -> f64 {
    let v = apply2(a, xi);
    let x = sigma * (v[0] * v[0] + v[1] * v[1]).ln();
    // 1 − cos x = 2 sin²(x/2)
    2.0 * (0.5 * x).sin().powi(2)
}

/// `∫₀^∞ r cos(rt) e^{−r²/2} dr` by adaptive Simpson on `[0, 12]`
/// (the neglected tail is below `e^{−72}`).
pub fn r_integral(t: f64) -> f64 {
    adaptive_simpson(|r| r * (r * t).cos() * (-0.5 * r * r).exp(), 0.0, R_CUTOFF, R_TOL)
}

/// Node counts of the pairing quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeQuadrature {
    /// Trapezoid nodes on the unit circle of directions.
    pub eta: usize,
    /// Gauss–Legendre nodes on `[0, 12/a]`.
    pub r: usize,
    /// Gauss–Legendre nodes in `|x|` on `[0, a]`.
    pub x_radial: usize,
    /// Trapezoid nodes in `arg x`.
    pub x_angular: usize,
}

impl Default for ProbeQuadrature {
    fn default() -> Self {
        Self { eta: 256, r: 128, x_radial: 32, x_angular: 64 }
    }
}

fn check_disk(group: &SchottkyGroup, a: f64) -> Result<(), ScatteringError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(ScatteringError::InvalidArgument(format!("probe scale a = {a} must be positive")));
    }
    let origin = Complex64::new(0.0, 0.0);
    let room = match group.rect() {
        Some(r) => group.circle_gap(origin).min(r.interior_distance(origin)),
        None => group.circle_gap(origin),
    };
    if !(room > a) {
        return Err(ScatteringError::ProbeDomain { a });
    }
    Ok(())
}

/// Real part of `⟨φ₁, B₀ φ₂⟩` for probes of scale `a` centred at the origin.
pub fn probe_pairing(
    group: &SchottkyGroup,
    psi: &DiffeoField,
    sigma: f64,
    a: f64,
    quad: &ProbeQuadrature,
) -> Result<f64, ScatteringError> {
    check_disk(group, a)?;
    if quad.eta < 2 || !quad.eta.is_multiple_of(2) || quad.r == 0 || quad.x_radial == 0 || quad.x_angular == 0 {
        return Err(ScatteringError::InvalidArgument(format!("bad probe quadrature {quad:?}")));
    }
    let r_rule: Vec<(f64, f64)> = GaussLegendre::new(quad.r).mapped(0.0, R_CUTOFF / a).collect();
    let radial: Vec<(f64, f64)> = GaussLegendre::new(quad.x_radial).mapped(0.0, a).collect();
    // b₀ and the r-integrand are even in η, so half the circle suffices.
    let half = quad.eta / 2;
    let d_eta = 2.0 * PI / quad.eta as f64;
    let etas: Vec<[f64; 2]> = (0..half)
        .map(|k| {
            let t = k as f64 * d_eta;
            [t.cos(), t.sin()]
        })
        .collect();
    let gauss: Vec<(f64, f64)> = r_rule.iter().map(|(r, w)| (*r, w * r * (-0.5 * a * a * r * r).exp())).collect();
    let d_theta = 2.0 * PI / quad.x_angular as f64;
    let mut total = 0.0;
    for (rho, w_rho) in &radial {
        for k in 0..quad.x_angular {
            let theta = k as f64 * d_theta;
            let x = Complex64::from_polar(*rho, theta);
            let dist = psi.distortion_matrix(x)?;
            let mut inner = 0.0;
            for eta in &etas {
                let b0 = b0_from(&dist, sigma, *eta);
                if b0 == 0.0 {
                    continue;
                }
                let dot = x.re * eta[0] + x.im * eta[1];
                let r_sum: f64 = gauss.iter().map(|(r, w)| w * (r * dot).cos()).sum();
                inner += b0 * r_sum;
            }
            total += w_rho * rho * d_theta * 2.0 * d_eta * inner;
        }
    }
    Ok(total / (2.0 * PI * PI))
}

/// The two probe families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// `(C₁/a) Θ(a − |x|)`.
    Step,
    /// `(C₂/a) e^{−|x|²/2a²}` times a smooth cutoff near the boundary.
    Gaussian,
}

/// A probe realized on a node grid with unit grid norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    pub kind: ProbeKind,
    pub a: f64,
    pub values: Vec<Complex64>,
}

/// `C₁ = C₂ = 1/√π`: unit `L²` norm of both continuum probes.
pub const PROBE_CONSTANT: f64 = 0.564_189_583_547_756_3;

/// `6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

impl ProbeState {
    /// Samples the probe on `grid` and rescales it to unit grid norm. The
    /// Gaussian is multiplied by a C² cutoff rising over distance `a/4`
    /// from the boundary of the truncated domain.
    pub fn realize(kind: ProbeKind, a: f64, group: &SchottkyGroup, grid: &NodeGrid) -> Result<Self, ScatteringError> {
        check_disk(group, a)?;
        let values: Vec<Complex64> = grid
            .nodes
            .iter()
            .map(|x| {
                let v = match kind {
                    ProbeKind::Step => {
                        if x.norm() < a {
                            PROBE_CONSTANT / a
                        } else {
                            0.0
                        }
                    }
                    ProbeKind::Gaussian => {
                        let boundary = match group.rect() {
                            Some(r) => group.circle_gap(*x).min(r.interior_distance(*x)),
                            None => group.circle_gap(*x),
                        };
                        PROBE_CONSTANT / a * (-x.norm_sqr() / (2.0 * a * a)).exp() * smoothstep(boundary / (0.25 * a))
                    }
                };
                Complex64::new(v, 0.0)
            })
            .collect();
        let norm = grid.norm(&values);
        if !(norm > 0.0) {
            return Err(ScatteringError::BadGrid(format!("no grid node inside the probe of scale {a}")));
        }
        Ok(Self { kind, a, values: values.into_iter().map(|v| v / norm).collect() })
    }
}
