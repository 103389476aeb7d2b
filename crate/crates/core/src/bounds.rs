//! The distortion curve
//! `f_σ(λ) = ∫₀^{2π} [1 − cos(σ ln(λ cos²θ + λ⁻¹ sin²θ))] dθ`,
//! its small-distortion asymptotics and inversion, and the dimension
//! distortion window of a `K`-quasiconformal map.
//!
//! Calibration convention: the dilatation threshold `K(ε) = 1 + δ` solves
//! `f_σ(1 + δ) = 2σ²ε²`. Only the shape `δ = Θ(ε)` is meaningful; the raw
//! curve is exposed so callers can recalibrate.
//!
//! `f_σ` increases from `λ = 1` up to a first local maximum `λ*(σ)` and
//! oscillates beyond it (the phase `σ ln λ` wraps). Inversion therefore
//! brackets on `[1, λ*]`, where the curve is strictly increasing.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limitset::linear_fit;
use crate::quad::adaptive_simpson;

/// Upper end of the λ range searched for the first maximum.
pub const LAMBDA_CEILING: f64 = 1e6;
/// Absolute quadrature tolerance; tightened further for small values.
pub const QUAD_TOL: f64 = 1e-10;
/// Bisection tolerance on δ.
pub const INVERT_TOL: f64 = 1e-10;
/// δ values of the small-distortion fit.
pub const FIT_DELTAS: [f64; 3] = [1e-3, 2e-3, 4e-3];
/// Largest relative residual accepted from the small-distortion fit.
pub const FIT_RESIDUAL_TOL: f64 = 0.01;

const SUBINTERVALS: usize = 8;
const PEAK_SCAN: usize = 600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target {target:e} exceeds the attainable ceiling {ceiling:e} (reached at lambda = {lambda_peak})")]
    OutOfRange { target: f64, ceiling: f64, lambda_peak: f64 },
    #[error("small-distortion fit unstable: relative residual {0:e}")]
    FitInstability(f64),
}

/// `f_σ(λ)` for any `λ > 0`; `f_σ(λ) = f_σ(1/λ)`.
pub fn f_sigma(sigma: f64, lambda: f64) -> Result<f64, BoundsError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BoundsError::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    if !sigma.is_finite() {
        return Err(BoundsError::InvalidArgument(format!("sigma = {sigma} must be finite")));
    }
    if lambda == 1.0 || sigma == 0.0 {
        return Ok(0.0);
    }
    let inv = lambda.recip();
    // 1 − cos x = 2 sin²(x/2), without cancellation for small x.
    let integrand = |t: f64| {
        let (s, c) = t.sin_cos();
        let x = sigma * (lambda * c * c + inv * s * s).ln();
        2.0 * (0.5 * x).sin().powi(2)
    };
    // Near λ = 1 the value is ≈ (π/2)σ² ln²λ; keep the tolerance relative.
    let scale = (sigma * lambda.ln()).powi(2);
    let tol = (QUAD_TOL * scale.min(1.0)).max(1e-300);
    // The integrand has period π and is even about 0 and π/2, so a quarter
    // period suffices. Fixed subintervals keep adaptive refinement from
    // being fooled by coincident samples at multiples of π/2.
    let h = FRAC_PI_2 / SUBINTERVALS as f64;
    let quarter: f64 = (0..SUBINTERVALS)
        .map(|k| {
            let a = k as f64 * h;
            adaptive_simpson(integrand, a, a + h, tol / (4 * SUBINTERVALS) as f64)
        })
        .sum();
    Ok((4.0 * quarter).clamp(0.0, 4.0 * PI))
}

/// Fit of `f_σ(1+δ)/(σ²δ²) = C + bδ` over [`FIT_DELTAS`]; returns `C`.
pub fn asymptotic_coefficient(sigma: f64) -> Result<f64, BoundsError> {
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(BoundsError::InvalidArgument(format!("sigma = {sigma} must be nonzero")));
    }
    let ys = FIT_DELTAS
        .iter()
        .map(|&d| Ok(f_sigma(sigma, 1.0 + d)? / (sigma * sigma * d * d)))
        .collect::<Result<Vec<f64>, BoundsError>>()?;
    let (slope, _) = linear_fit(&FIT_DELTAS, &ys);
    let mean_x = FIT_DELTAS.iter().sum::<f64>() / FIT_DELTAS.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let c = mean_y - slope * mean_x;
    let residual = FIT_DELTAS.iter().zip(&ys).map(|(x, y)| (y - c - slope * x).abs()).fold(0.0, f64::max) / c.abs();
    if !(residual <= FIT_RESIDUAL_TOL) {
        return Err(BoundsError::FitInstability(residual));
    }
    Ok(c)
}

/// First local maximum of `λ ↦ f_σ(λ)` on `[1, LAMBDA_CEILING]`, as
/// `(λ*, f_σ(λ*))`; the ceiling itself if the curve never turns.
pub fn first_peak(sigma: f64) -> Result<(f64, f64), BoundsError> {
    let sigma = sigma.abs();
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(BoundsError::InvalidArgument(format!("sigma = {sigma} must be nonzero")));
    }
    let top = LAMBDA_CEILING.ln();
    let at = |k: usize| (top * k as f64 / PEAK_SCAN as f64).exp();
    let mut prev = 0.0;
    for k in 1..=PEAK_SCAN {
        let v = f_sigma(sigma, at(k))?;
        if v < prev {
            // Golden-section refinement in ln λ on [k-2, k].
            let (mut a, mut b) = (top * (k as f64 - 2.0) / PEAK_SCAN as f64, top * k as f64 / PEAK_SCAN as f64);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = f_sigma(sigma, c.exp())?;
            let mut fd = f_sigma(sigma, d.exp())?;
            while b - a > 1e-12 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = f_sigma(sigma, c.exp())?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = f_sigma(sigma, d.exp())?;
                }
            }
            let l = (0.5 * (a + b)).exp();
            return Ok((l, f_sigma(sigma, l)?));
        }
        prev = v;
    }
    Ok((LAMBDA_CEILING, prev))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub sigma: f64,
    pub epsilon: f64,
    /// `2σ²ε²`.
    pub target: f64,
    pub delta: f64,
    /// `K(ε) = 1 + δ`.
    pub k: f64,
}

/// δ with `f_σ(1 + δ) = 2σ²ε²`, by bisection on the increasing branch.
pub fn invert_bound(sigma: f64, epsilon: f64) -> Result<Inversion, BoundsError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(BoundsError::InvalidArgument(format!("epsilon = {epsilon} must be nonnegative")));
    }
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(BoundsError::InvalidArgument(format!("sigma = {sigma} must be nonzero")));
    }
    let target = 2.0 * sigma * sigma * epsilon * epsilon;
    if target == 0.0 {
        return Ok(Inversion { sigma, epsilon, target, delta: 0.0, k: 1.0 });
    }
    let (peak, ceiling) = first_peak(sigma)?;
    if target > ceiling {
        return Err(BoundsError::OutOfRange { target, ceiling, lambda_peak: peak });
    }
    let (mut lo, mut hi) = (0.0, peak - 1.0);
    while hi - lo > INVERT_TOL {
        let mid = 0.5 * (lo + hi);
        if f_sigma(sigma, 1.0 + mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    Ok(Inversion { sigma, epsilon, target, delta, k: 1.0 + delta })
}

/// Bounds on the dimension of the image of a set of dimension `D` under a
/// `K`-quasiconformal map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionWindow {
    pub k: f64,
    pub d_in: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `2D/(2K + (K−1)D) ≤ D' ≤ 2KD/(2 + (K−1)D)`.
pub fn dimension_window(k: f64, d: f64) -> Result<DistortionWindow, BoundsError> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(BoundsError::InvalidArgument(format!("K = {k} must be >= 1")));
    }
    if !(0.0..=2.0).contains(&d) {
        return Err(BoundsError::InvalidArgument(format!("D = {d} must lie in [0, 2]")));
    }
    let lower = 2.0 * d / (2.0 * k + (k - 1.0) * d);
    let upper = 2.0 * k * d / (2.0 + (k - 1.0) * d);
    Ok(DistortionWindow { k, d_in: d, lower, upper })
}

/// Half-width of the window at `K = K(ε)`.
pub fn nu_of_eps(sigma: f64, epsilon: f64, d: f64) -> Result<f64, BoundsError> {
    let inv = invert_bound(sigma, epsilon)?;
    let w = dimension_window(inv.k, d)?;
    Ok((w.upper - d).max(d - w.lower))
}

/// Sampled `(λ, f_σ(λ))` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsigmaCurve {
    pub sigma: f64,
    pub samples: Vec<(f64, f64)>,
}

impl FsigmaCurve {
    pub fn sample(sigma: f64, lambdas: &[f64]) -> Result<Self, BoundsError> {
        let samples = lambdas.iter().map(|&l| Ok((l, f_sigma(sigma, l)?))).collect::<Result<Vec<_>, BoundsError>>()?;
        Ok(Self { sigma, samples })
    }

    /// `n` points spaced uniformly in `[lo, hi]`.
    pub fn uniform(sigma: f64, lo: f64, hi: f64, n: usize) -> Result<Self, BoundsError> {
        let lambdas: Vec<f64> = match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        Self::sample(sigma, &lambdas)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    /// `lambda,f_sigma` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,f_sigma\n");
        for (l, f) in &self.samples {
            out.push_str(&format!("{l:.16e},{f:.16e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: composite trapezoid rule, spectrally accurate for
    /// smooth periodic integrands.
    fn trapezoid(sigma: f64, lambda: f64, n: usize) -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let t = k as f64 * h;
                1.0 - (sigma * (lambda * t.cos().powi(2) + t.sin().powi(2) / lambda).ln()).cos()
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn value_at_one_is_exactly_zero() {
        for s in [0.5, 1.0, 2.0, -3.0] {
            assert_eq!(f_sigma(s, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_trapezoid_oracle() {
        for s in [0.5, 1.0, 2.0] {
            for l in [1.5, 2.0, 4.0, 8.0, 100.0] {
                let a = f_sigma(s, l).unwrap();
                let b = trapezoid(s, l, 4096);
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn small_delta_taylor() {
        let v = f_sigma(1.0, 1.01).unwrap();
        let taylor = FRAC_PI_2 * 1e-4;
        assert!((v / taylor - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn increasing_on_acceptance_samples() {
        for s in [0.5, 1.0, 2.0] {
            let c = FsigmaCurve::sample(s, &[1.0, 1.5, 2.0, 4.0, 8.0]).unwrap();
            assert!(c.samples.windows(2).all(|w| w[1].1 > w[0].1), "{c:?}");
        }
    }

    #[test]
    fn coefficient_is_half_pi() {
        for s in [0.5, 1.0, 2.0] {
            let c = asymptotic_coefficient(s).unwrap();
            assert!((c / FRAC_PI_2 - 1.0).abs() < 0.01, "sigma {s}: {c}");
        }
    }

    #[test]
    fn reciprocal_symmetry() {
        for s in [0.5, 1.0, 2.0] {
            for l in [1.3, 2.0, 7.0] {
                assert_abs_diff_eq!(f_sigma(s, l).unwrap(), f_sigma(s, 1.0 / l).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn first_peak_locations() {
        let (l, v) = first_peak(1.0).unwrap();
        assert!((l - 43.6).abs() < 1.0, "{l}");
        assert!(v > 9.8 && v < 10.0, "{v}");
        let (l, _) = first_peak(2.0).unwrap();
        assert!((l - 6.7).abs() < 0.3, "{l}");
    }

    #[test]
    fn inversion_round_trip() {
        for s in [0.5, 1.0, 2.0] {
            for d in [1e-4, 1e-3, 0.1, 0.5, 1.0] {
                let f = f_sigma(s, 1.0 + d).unwrap();
                let eps = (f / (2.0 * s * s)).sqrt();
                let inv = invert_bound(s, eps).unwrap();
                assert_abs_diff_eq!(inv.delta, d, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn inversion_edge_cases() {
        assert_eq!(invert_bound(1.0, 0.0).unwrap().delta, 0.0);
        assert!(matches!(invert_bound(1.0, 10.0), Err(BoundsError::OutOfRange { .. })));
        assert!(invert_bound(1.0, -1.0).is_err());
        let a = invert_bound(1.0, 0.01).unwrap().delta;
        let b = invert_bound(1.0, 0.02).unwrap().delta;
        assert!(a < b);
    }

    #[test]
    fn linear_leading_order() {
        // δ/ε → √(4/π) under the calibration 2σ²ε² = (π/2)σ²δ².
        let limit = (4.0 / PI).sqrt();
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| invert_bound(1.0, e).unwrap().delta / e).collect();
        assert!((ratios[2] - limit).abs() < (ratios[0] - limit).abs());
        assert!((ratios[2] - limit).abs() < 1e-3, "{ratios:?}");
    }

    #[test]
    fn window_examples() {
        let w = dimension_window(1.0, 0.7).unwrap();
        assert_eq!((w.lower, w.upper), (0.7, 0.7));
        let w = dimension_window(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(w.lower, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(w.upper, 4.0 / 3.0, epsilon = 1e-12);
        assert!(dimension_window(0.5, 1.0).is_err());
        assert!(dimension_window(2.0, 2.5).is_err());
    }

    #[test]
    fn nu_decreases_with_epsilon() {
        let nus: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| nu_of_eps(1.0, e, 1.0).unwrap()).collect();
        assert!(nus.windows(2).all(|w| w[1] < w[0]), "{nus:?}");
    }

    #[test]
    fn csv_export() {
        let c = FsigmaCurve::uniform(1.0, 1.0, 8.0, 8).unwrap();
        assert!(c.is_nondecreasing());
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("lambda,f_sigma\n1.0000000000000000e0,0.0000000000000000e0"));
    }
}
