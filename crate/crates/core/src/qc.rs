//! Explicit planar diffeomorphisms and their quasiconformal distortion.
//!
//! A [`DiffeoField`] is one of a few closed-form families (or an ordered
//! composite of them). For each we expose the real Jacobian `Dψ`, the
//! Beltrami coefficient `μ = ψ_z̄ / ψ_z`, the unimodular distortion matrix
//! `A = √det Dψ · Dψ⁻¹`, and the larger eigenvalue `λ` of `AᵗA`, whose
//! supremum is the dilatation `K`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kleinian::Rect;
use crate::moebius::{MoebiusError, MoebiusMap};

/// Real 2×2 matrix, row-major: `[[∂u/∂x, ∂u/∂y], [∂v/∂x, ∂v/∂y]]`.
pub type Mat2 = [[f64; 2]; 2];

/// Relative step of central finite differences, scaled by `max(1, |z|)`.
pub const FD_STEP: f64 = 1e-6;
/// `|ψ_z|` below this makes the Beltrami coefficient undefined.
pub const DEGENERATE_TOL: f64 = 1e-12;
/// Default dilatation grid resolution per side.
pub const DEFAULT_GRID: usize = 256;
/// Number of probe points in the construction-time orientation check.
pub const ORIENTATION_PROBES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("map is singular at {0}")]
    SingularPoint(Complex64),
    #[error("Jacobian is singular at {0}")]
    SingularJacobian(Complex64),
    #[error("degenerate holomorphic derivative at {0}")]
    DegenerateDerivative(Complex64),
    #[error("map reverses orientation at {0}")]
    OrientationReversing(Complex64),
    #[error("sample grid is empty")]
    EmptyGrid,
}

impl From<MoebiusError> for QcError {
    fn from(e: MoebiusError) -> Self {
        match e {
            MoebiusError::Pole(z) => QcError::SingularPoint(z),
            other => QcError::InvalidParameter(other.to_string()),
        }
    }
}

/// Map families. Composites apply their members in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Identity,
    /// `z ↦ z + μ z̄`, `|μ| < 1`.
    LinearBeltrami {
        mu: Complex64,
    },
    /// `z ↦ z |z|^(K-1)`, `K ≥ 1`.
    RadialStretch {
        k: f64,
    },
    Moebius {
        map: MoebiusMap,
    },
    Composite {
        maps: Vec<DiffeoField>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoField {
    #[serde(flatten)]
    pub family: Family,
    /// When false, Jacobians are taken by central finite differences.
    #[serde(default = "default_true")]
    pub analytic_jacobian: bool,
}

fn default_true() -> bool {
    true
}

impl DiffeoField {
    /// Validates parameters and checks orientation on probe points.
    pub fn new(family: Family) -> Result<Self, QcError> {
        let f = Self { family, analytic_jacobian: true };
        f.validate()?;
        Ok(f)
    }

    pub fn identity() -> Self {
        Self { family: Family::Identity, analytic_jacobian: true }
    }

    pub fn linear_beltrami(mu: Complex64) -> Result<Self, QcError> {
        Self::new(Family::LinearBeltrami { mu })
    }

    pub fn radial_stretch(k: f64) -> Result<Self, QcError> {
        Self::new(Family::RadialStretch { k })
    }

    pub fn moebius(map: MoebiusMap) -> Self {
        Self { family: Family::Moebius { map }, analytic_jacobian: true }
    }

    pub fn composite(maps: Vec<DiffeoField>) -> Result<Self, QcError> {
        Self::new(Family::Composite { maps })
    }

    /// Same map, Jacobians by finite differences.
    pub fn with_finite_differences(mut self) -> Self {
        self.analytic_jacobian = false;
        self
    }

    /// Parameter checks plus `det Dψ > 0` on an 8×8 probe grid over
    /// `[-2, 2]²` (points where the map is singular are skipped).
    pub fn validate(&self) -> Result<(), QcError> {
        self.validate_parameters()?;
        let side = (ORIENTATION_PROBES as f64).sqrt() as usize;
        for i in 0..side {
            for j in 0..side {
                let z = Complex64::new(
                    -2.0 + 4.0 * (i as f64 + 0.5) / side as f64,
                    -2.0 + 4.0 * (j as f64 + 0.5) / side as f64,
                );
                match self.jacobian(z) {
                    Ok(m) => {
                        if det(&m) <= 0.0 {
                            return Err(QcError::OrientationReversing(z));
                        }
                    }
                    Err(QcError::SingularPoint(_)) | Err(QcError::SingularJacobian(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    }

    fn validate_parameters(&self) -> Result<(), QcError> {
        match &self.family {
            Family::LinearBeltrami { mu } => {
                if !(mu.norm() < 1.0) {
                    return Err(QcError::InvalidParameter(format!("|mu| = {} must be < 1", mu.norm())));
                }
            }
            Family::RadialStretch { k } => {
                if !(k.is_finite() && *k >= 1.0) {
                    return Err(QcError::InvalidParameter(format!("K = {k} must be finite and >= 1")));
                }
            }
            Family::Composite { maps } => {
                for m in maps {
                    m.validate_parameters()?;
                }
            }
            Family::Identity | Family::Moebius { .. } => {}
        }
        Ok(())
    }

    pub fn apply(&self, z: Complex64) -> Result<Complex64, QcError> {
        Ok(match &self.family {
            Family::Identity => z,
            Family::LinearBeltrami { mu } => z + mu * z.conj(),
            Family::RadialStretch { k } => {
                if z == Complex64::new(0.0, 0.0) {
                    z
                } else {
                    z * z.norm().powf(k - 1.0)
                }
            }
            Family::Moebius { map } => map.apply_finite(z)?,
            Family::Composite { maps } => {
                let mut w = z;
                for m in maps {
                    w = m.apply(w)?;
                }
                w
            }
        })
    }

    /// Wirtinger derivatives `(ψ_z, ψ_z̄)` in closed form.
    fn wirtinger(&self, z: Complex64) -> Result<(Complex64, Complex64), QcError> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Ok(match &self.family {
            Family::Identity => (one, zero),
            Family::LinearBeltrami { mu } => (one, *mu),
            Family::RadialStretch { k } => {
                if *k == 1.0 {
                    (one, zero)
                } else if z == zero {
                    return Err(QcError::SingularPoint(z));
                } else {
                    let r = z.norm();
                    let p = r.powf(k - 1.0);
                    let phase = z / z.conj();
                    (Complex64::new(0.5 * (k + 1.0) * p, 0.0), 0.5 * (k - 1.0) * p * phase)
                }
            }
            Family::Moebius { map } => (map.derivative(z)?, zero),
            Family::Composite { .. } => from_jacobian(&self.analytic_chain(z)?),
        })
    }

    fn analytic_chain(&self, z: Complex64) -> Result<Mat2, QcError> {
        match &self.family {
            Family::Composite { maps } => {
                let mut m = IDENTITY2;
                let mut w = z;
                for f in maps {
                    m = mul(&f.analytic_jacobian_at(w)?, &m);
                    w = f.apply(w)?;
                }
                Ok(m)
            }
            _ => {
                let (fz, fzb) = self.wirtinger(z)?;
                Ok(to_jacobian(fz, fzb))
            }
        }
    }

    fn analytic_jacobian_at(&self, z: Complex64) -> Result<Mat2, QcError> {
        if self.analytic_jacobian {
            self.analytic_chain(z)
        } else {
            self.finite_difference_jacobian(z)
        }
    }

    fn finite_difference_jacobian(&self, z: Complex64) -> Result<Mat2, QcError> {
        let h = FD_STEP * z.norm().max(1.0);
        let dx = (self.apply(z + h)? - self.apply(z - h)?) / (2.0 * h);
        let iy = Complex64::new(0.0, h);
        let dy = (self.apply(z + iy)? - self.apply(z - iy)?) / (2.0 * h);
        Ok([[dx.re, dy.re], [dx.im, dy.im]])
    }

    /// Real Jacobian `Dψ(z)`.
    pub fn jacobian(&self, z: Complex64) -> Result<Mat2, QcError> {
        self.analytic_jacobian_at(z)
    }

    /// Jacobian determinant `det Dψ(z)`.
    pub fn jacobian_det(&self, z: Complex64) -> Result<f64, QcError> {
        Ok(det(&self.jacobian(z)?))
    }

    /// `μ = ψ_z̄ / ψ_z` from the Wirtinger combinations of the Jacobian.
    pub fn beltrami(&self, z: Complex64) -> Result<Complex64, QcError> {
        let (fz, fzb) = from_jacobian(&self.jacobian(z)?);
        if fz.norm() < DEGENERATE_TOL {
            return Err(QcError::DegenerateDerivative(z));
        }
        Ok(fzb / fz)
    }

    /// `A(z) = √det Dψ · Dψ⁻¹`, unimodular.
    pub fn distortion_matrix(&self, z: Complex64) -> Result<Mat2, QcError> {
        let j = self.jacobian(z)?;
        distortion_of(&j).ok_or(QcError::SingularJacobian(z))
    }

    /// Larger eigenvalue of `AᵗA`; the smaller one is its reciprocal.
    pub fn lambda_max(&self, z: Complex64) -> Result<f64, QcError> {
        Ok(lambda_of(&self.distortion_matrix(z)?))
    }

    /// The Möbius map this field equals, if it is conformal by construction.
    pub fn as_moebius(&self) -> Option<MoebiusMap> {
        match &self.family {
            Family::Identity => Some(MoebiusMap::IDENTITY),
            Family::LinearBeltrami { mu } if mu.norm() == 0.0 => Some(MoebiusMap::IDENTITY),
            Family::RadialStretch { k } if *k == 1.0 => Some(MoebiusMap::IDENTITY),
            Family::Moebius { map } => Some(*map),
            Family::Composite { maps } => {
                let mut acc = MoebiusMap::IDENTITY;
                for m in maps {
                    acc = m.as_moebius()?.compose(&acc);
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Dilatation over a uniform `n × n` grid of cell centers of `rect`.
    pub fn dilatation(&self, grid: &SampleGrid) -> Result<DistortionReport, QcError> {
        let points = grid.points();
        if points.is_empty() {
            return Err(QcError::EmptyGrid);
        }
        let samples: Vec<Option<(f64, f64)>> = points
            .par_iter()
            .map(|&z| {
                let lam = self.lambda_max(z).ok()?;
                let mu = self.beltrami(z).ok()?;
                Some((lam, mu.norm()))
            })
            .collect();
        let mut failures = 0usize;
        let mut k_lambda = f64::NEG_INFINITY;
        let mut m_max = f64::NEG_INFINITY;
        let mut sup_location = points[0];
        for (z, s) in points.iter().zip(&samples) {
            match s {
                None => failures += 1,
                Some((lam, m)) => {
                    if *lam > k_lambda {
                        k_lambda = *lam;
                        sup_location = *z;
                    }
                    m_max = m_max.max(*m);
                }
            }
        }
        if failures == points.len() {
            return Err(QcError::EmptyGrid);
        }
        Ok(DistortionReport {
            k_from_lambda: k_lambda.max(1.0),
            k_from_beltrami: ((1.0 + m_max) / (1.0 - m_max)).max(1.0),
            sup_location,
            grid: grid.clone(),
            failures,
        })
    }
}

/// Uniform grid of cell centers over a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub rect: Rect,
    pub n: usize,
}

impl SampleGrid {
    pub fn new(rect: Rect, n: usize) -> Self {
        Self { rect, n }
    }

    pub fn points(&self) -> Vec<Complex64> {
        let Rect { xmin, xmax, ymin, ymax } = self.rect;
        let n = self.n as f64;
        (0..self.n)
            .flat_map(|j| {
                (0..self.n).map(move |i| {
                    Complex64::new(
                        xmin + (xmax - xmin) * (i as f64 + 0.5) / n,
                        ymin + (ymax - ymin) * (j as f64 + 0.5) / n,
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub k_from_lambda: f64,
    pub k_from_beltrami: f64,
    pub sup_location: Complex64,
    pub grid: SampleGrid,
    /// Grid points skipped because the map is singular there.
    pub failures: usize,
}

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn apply2(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Jacobian from `(ψ_z, ψ_z̄)`: `ψ_x = ψ_z + ψ_z̄`, `ψ_y = i(ψ_z − ψ_z̄)`.
pub fn to_jacobian(fz: Complex64, fzb: Complex64) -> Mat2 {
    let fx = fz + fzb;
    let fy = Complex64::new(0.0, 1.0) * (fz - fzb);
    [[fx.re, fy.re], [fx.im, fy.im]]
}

/// `(ψ_z, ψ_z̄) = ((ψ_x − iψ_y)/2, (ψ_x + iψ_y)/2)`.
pub fn from_jacobian(m: &Mat2) -> (Complex64, Complex64) {
    let fx = Complex64::new(m[0][0], m[1][0]);
    let fy = Complex64::new(m[0][1], m[1][1]);
    let i = Complex64::new(0.0, 1.0);
    (0.5 * (fx - i * fy), 0.5 * (fx + i * fy))
}

/// `√det J · J⁻¹`, or `None` if `det J ≤ 0` or not finite.
pub fn distortion_of(j: &Mat2) -> Option<Mat2> {
    let d = det(j);
    if !(d > 0.0 && d.is_finite()) {
        return None;
    }
    let s = 1.0 / d.sqrt();
    Some([[j[1][1] * s, -j[0][1] * s], [-j[1][0] * s, j[0][0] * s]])
}

/// Larger eigenvalue of `AᵗA` for unimodular `A`.
pub fn lambda_of(a: &Mat2) -> f64 {
    ata_eigenvalues(a).0.max(1.0)
}

/// Both eigenvalues of `AᵗA`, larger first. The singular values of a real
/// 2×2 matrix are `|A_z| ± |A_z̄|`, which avoids the cancellation of the
/// characteristic-polynomial route near `λ = 1`.
pub fn ata_eigenvalues(a: &Mat2) -> (f64, f64) {
    let (p, q) = from_jacobian(a);
    let (p, q) = (p.norm(), q.norm());
    ((p + q).powi(2), (p - q).powi(2))
}
