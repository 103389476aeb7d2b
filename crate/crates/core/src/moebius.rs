//! Möbius transformations `z -> (az + b) / (cz + d)` with `ad - bc = 1`.
//!
//! Infinity is a tagged state of [`ExtendedPoint`], never a large float.
//! Every map is stored normalized, with the sign of the matrix fixed so that
//! `a` has nonnegative real part (ties broken on the imaginary part, then on
//! `b`, `c`, `d`).

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance on `|det - 1|` guaranteed by every constructor.
pub const DET_TOL: f64 = 1e-12;
/// `|cz + d|` below this is treated as a pole.
pub const POLE_TOL: f64 = 1e-300;
/// Parabolic iff `|tr^2 - 4|` is at most this.
pub const PARABOLIC_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoebiusError {
    #[error("singular matrix (determinant {0:e})")]
    Singular(f64),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("point {0} is the pole of the map")]
    Pole(Complex64),
}

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedPoint {
    Finite(Complex64),
    Infinity,
}

impl ExtendedPoint {
    pub fn finite(re: f64, im: f64) -> Self {
        ExtendedPoint::Finite(Complex64::new(re, im))
    }

    pub fn as_finite(&self) -> Option<Complex64> {
        match *self {
            ExtendedPoint::Finite(z) => Some(z),
            ExtendedPoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedPoint::Infinity)
    }
}

impl From<Complex64> for ExtendedPoint {
    fn from(z: Complex64) -> Self {
        ExtendedPoint::Finite(z)
    }
}

/// Trace classification of a Möbius map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapClass {
    Identity,
    Elliptic,
    Parabolic,
    Loxodromic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MoebiusMap {
    pub const IDENTITY: MoebiusMap = MoebiusMap {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
        c: Complex64::new(0.0, 0.0),
        d: Complex64::new(1.0, 0.0),
    };

    /// Normalizes `[[a, b], [c, d]]` by a square root of its determinant.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, MoebiusError> {
        if ![a, b, c, d].iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(MoebiusError::NonFinite);
        }
        let det = a * d - b * c;
        let scale = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
        if det.norm() <= 1e-14 * scale || det.norm() == 0.0 {
            return Err(MoebiusError::Singular(det.norm()));
        }
        let r = det.sqrt();
        Ok(Self::canonical(a / r, b / r, c / r, d / r))
    }

    /// Builds a map from real parts and imaginary parts given row-major.
    pub fn from_reals(v: [f64; 8]) -> Result<Self, MoebiusError> {
        Self::new(
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
            Complex64::new(v[6], v[7]),
        )
    }

    /// `z -> k^2 z` written as `diag(k, 1/k)`.
    pub fn diagonal(k: Complex64) -> Result<Self, MoebiusError> {
        Self::new(k, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), k.inv())
    }

    fn canonical(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        let flip = {
            let mut decided = None;
            for z in [a, b, c, d] {
                if z.re != 0.0 {
                    decided = Some(z.re < 0.0);
                    break;
                }
                if z.im != 0.0 {
                    decided = Some(z.im < 0.0);
                    break;
                }
            }
            decided.unwrap_or(false)
        };
        if flip {
            Self { a: -a, b: -b, c: -c, d: -d }
        } else {
            Self { a, b, c, d }
        }
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }
    pub fn b(&self) -> Complex64 {
        self.b
    }
    pub fn c(&self) -> Complex64 {
        self.c
    }
    pub fn d(&self) -> Complex64 {
        self.d
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn apply(&self, z: ExtendedPoint) -> ExtendedPoint {
        match z {
            ExtendedPoint::Infinity => {
                if self.c == Complex64::new(0.0, 0.0) {
                    ExtendedPoint::Infinity
                } else {
                    ExtendedPoint::Finite(self.a / self.c)
                }
            }
            ExtendedPoint::Finite(z) => {
                let den = self.c * z + self.d;
                if self.is_pole_denominator(den, z) {
                    ExtendedPoint::Infinity
                } else {
                    ExtendedPoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Applies the map to a finite point, failing at the pole.
    pub fn apply_finite(&self, z: Complex64) -> Result<Complex64, MoebiusError> {
        match self.apply(ExtendedPoint::Finite(z)) {
            ExtendedPoint::Finite(w) => Ok(w),
            ExtendedPoint::Infinity => Err(MoebiusError::Pole(z)),
        }
    }

    /// Complex derivative `1 / (cz + d)^2`.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64, MoebiusError> {
        let den = self.c * z + self.d;
        if self.is_pole_denominator(den, z) {
            return Err(MoebiusError::Pole(z));
        }
        Ok((den * den).inv())
    }

    /// Conformal dilation `|g'(z)| = 1 / |cz + d|^2`.
    pub fn conformal_dilation(&self, z: Complex64) -> Result<f64, MoebiusError> {
        let den = self.c * z + self.d;
        if self.is_pole_denominator(den, z) {
            return Err(MoebiusError::Pole(z));
        }
        Ok(1.0 / den.norm_sqr())
    }

    /// `cz + d` vanishes up to underflow or the rounding of its own terms.
    fn is_pole_denominator(&self, den: Complex64, z: Complex64) -> bool {
        let rounding = 4.0 * f64::EPSILON * (self.c.norm() * z.norm() + self.d.norm());
        den.norm() <= POLE_TOL.max(rounding)
    }

    /// Pole `-d/c`, or `None` for affine maps.
    pub fn pole(&self) -> Option<Complex64> {
        if self.c == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some(-self.d / self.c)
        }
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let (p, q, r, s) = (other.a, other.b, other.c, other.d);
        // The product of unimodular matrices is unimodular. Renormalizing by
        // the computed determinant would destroy long words, whose entries
        // are large enough that `ad - bc` cancels catastrophically.
        MoebiusMap::canonical(a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s)
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap::canonical(self.d, -self.b, -self.c, self.a)
    }

    pub fn conjugate_by(&self, h: &MoebiusMap) -> MoebiusMap {
        h.compose(self).compose(&h.inverse())
    }

    pub fn classify(&self) -> MapClass {
        if self.is_identity(DET_TOL) {
            return MapClass::Identity;
        }
        let tr = self.trace();
        let tr2 = tr * tr;
        if (tr2 - 4.0).norm() <= PARABOLIC_TOL {
            MapClass::Parabolic
        } else if tr2.im.abs() <= PARABOLIC_TOL && tr2.re >= 0.0 && tr2.re < 4.0 {
            MapClass::Elliptic
        } else {
            MapClass::Loxodromic
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&MoebiusMap::IDENTITY, tol)
    }

    /// Entrywise comparison up to the global sign of the matrix.
    pub fn approx_eq(&self, other: &MoebiusMap, tol: f64) -> bool {
        let plus = self.entries().iter().zip(other.entries()).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
        let minus = self.entries().iter().zip(other.entries()).map(|(x, y)| (x + y).norm()).fold(0.0f64, f64::max);
        plus.min(minus) <= tol
    }

    /// Squared Frobenius norm `|a|^2 + |b|^2 + |c|^2 + |d|^2`.
    pub fn frobenius_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    /// Hyperbolic distance from the base point `j = (0, 0, 1)` of upper
    /// half-space to its image: `cosh rho = (|a|^2+|b|^2+|c|^2+|d|^2) / 2`.
    pub fn base_displacement(&self) -> f64 {
        (0.5 * self.frobenius_sqr()).max(1.0).acosh()
    }

    /// Fixed points, attracting one first for loxodromic maps.
    pub fn fixed_points(&self) -> [ExtendedPoint; 2] {
        let zero = Complex64::new(0.0, 0.0);
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let (p, q) = if c == zero {
            // z -> (a z + b)/d: finite fixed point b/(d-a) and infinity.
            let fin =
                if (d - a).norm() <= 1e-300 { ExtendedPoint::Infinity } else { ExtendedPoint::Finite(b / (d - a)) };
            (fin, ExtendedPoint::Infinity)
        } else {
            let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
            let z1 = (a - d + disc) / (2.0 * c);
            let z2 = (a - d - disc) / (2.0 * c);
            (ExtendedPoint::Finite(z1), ExtendedPoint::Finite(z2))
        };
        // The multiplier at a finite fixed point z is 1/(cz+d)^2; at infinity
        // it is d^2 = 1/a^2.
        let multiplier = |z: &ExtendedPoint| match z {
            ExtendedPoint::Finite(z) => 1.0 / (c * z + d).norm_sqr(),
            ExtendedPoint::Infinity => d.norm_sqr(),
        };
        if multiplier(&p) <= multiplier(&q) {
            [p, q]
        } else {
            [q, p]
        }
    }

    pub fn attracting_fixed_point(&self) -> ExtendedPoint {
        self.fixed_points()[0]
    }

    /// Eight reals, row-major: `[re a, im a, re b, im b, re c, im c, re d, im d]`.
    pub fn to_reals(&self) -> [f64; 8] {
        [self.a.re, self.a.im, self.b.re, self.b.im, self.c.re, self.c.im, self.d.re, self.d.im]
    }
}

impl Default for MoebiusMap {
    fn default() -> Self {
        MoebiusMap::IDENTITY
    }
}

impl std::ops::Mul for MoebiusMap {
    type Output = MoebiusMap;
    fn mul(self, rhs: MoebiusMap) -> MoebiusMap {
        self.compose(&rhs)
    }
}

impl Serialize for MoebiusMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_reals().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MoebiusMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 8]>::deserialize(d)?;
        MoebiusMap::from_reals(v).map_err(serde::de::Error::custom)
    }
}
