//! Orbit sums for the scattering kernel.
//!
//! For a word with matrix `(a, b; c, d)` the kernel term is
//! `|γ'(x)|^s / |γx − y|^{2s} = |ax + b − y(cx + d)|^{−2s}`, which only needs
//! the vector `(ax + b, cx + d)`. Words are generated by left extension, so
//! that vector is updated by one 2×2 product per node of the word tree.
//!
//! Pruning. For `x` in the domain and a word `w` with first letter `m`,
//! `wx` lies in the target disk of `m`, and a left extension by `l` scales
//! `|w'(x)|` by at most `κ(l, m) = sup_{disk m} |l'|`. With
//! `ρ = (2g − 1) κ_max^{Re s}` and `gap` the distance from the `y` points to
//! the disks, the subtree rooted at `w` (including `w`) contributes at most
//! `|w'(x)|^{Re s} / (gap^{2 Re s} (1 − ρ))`. Subtrees whose bound is below
//! `prune_tol · reference` are dropped and their bounds added to the tail;
//! words of maximal length add the bound of their (omitted) descendants.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{pow_neg, ScatteringError, SpectralParam};
use crate::kleinian::{GroupWord, Letter, SchottkyGroup};

/// How far the orbit sum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub max_len: usize,
    /// Relative pruning tolerance; 0 enumerates the full word ball.
    pub prune_tol: f64,
}

impl Truncation {
    pub const DEFAULT_PRUNE_TOL: f64 = 1e-15;

    pub fn new(max_len: usize) -> Self {
        Self { max_len, prune_tol: Self::DEFAULT_PRUNE_TOL }
    }

    /// Every reduced word up to `max_len`, nothing pruned.
    pub fn full(max_len: usize) -> Self {
        Self { max_len, prune_tol: 0.0 }
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Self::new(12)
    }
}

/// Contraction data of a group: `κ(l, m)` and `ρ`.
#[derive(Debug, Clone)]
pub(crate) struct Contraction {
    pub kappa_max: f64,
}

impl Contraction {
    pub fn of(group: &SchottkyGroup) -> Self {
        let n = group.letter_count();
        let mut kappa_max = 0.0f64;
        for l in 0..n as u32 {
            let l = Letter(l);
            let m_l = group.letter_map(l);
            for m in 0..n as u32 {
                let m = Letter(m);
                if m == l.inverse() {
                    continue;
                }
                let disk = group.target_circle(m);
                let k = match m_l.pole() {
                    None => f64::INFINITY,
                    Some(p) => {
                        let dist = (disk.center - p).norm() - disk.radius;
                        if dist > 0.0 {
                            1.0 / (m_l.c().norm_sqr() * dist * dist)
                        } else {
                            f64::INFINITY
                        }
                    }
                };
                kappa_max = kappa_max.max(k);
            }
        }
        Self { kappa_max }
    }

    pub fn rho(&self, group: &SchottkyGroup, s_re: f64) -> f64 {
        let branching = (group.letter_count() as f64 - 1.0).max(0.0);
        branching * self.kappa_max.powf(s_re)
    }
}

/// Kept orbit vectors `(ax + b, cx + d)` of the non-identity words for one
/// base point `x`, and a bound on everything omitted.
#[derive(Debug, Clone, Default)]
pub struct OrbitTerms {
    pub vectors: Vec<(Complex64, Complex64)>,
    pub tail_bound: f64,
}

pub(crate) struct OrbitWalk<'a> {
    group: &'a SchottkyGroup,
    maps: Vec<[Complex64; 4]>,
    s_re: f64,
    max_len: usize,
    /// Pruning threshold; `None` disables pruning.
    tau: Option<f64>,
    /// `1 / (gap^{2 Re s} (1 − ρ))`, or `None` when no bound is available.
    scale: Option<f64>,
    rho: f64,
    out: OrbitTerms,
}

impl<'a> OrbitWalk<'a> {
    /// `gap` is the distance from the target points to the disks;
    /// `reference` sets the absolute pruning threshold.
    pub fn run(
        group: &'a SchottkyGroup,
        contraction: &Contraction,
        x: Complex64,
        gap: f64,
        s_re: f64,
        trunc: Truncation,
        reference: f64,
    ) -> OrbitTerms {
        if group.letter_count() == 0 || trunc.max_len == 0 {
            return OrbitTerms::default();
        }
        let rho = contraction.rho(group, s_re);
        let boundable = rho < 1.0 && gap > 0.0 && group.circle_gap(x) > 0.0;
        let scale = boundable.then(|| 1.0 / (gap.powf(2.0 * s_re) * (1.0 - rho)));
        let tau = (boundable && trunc.prune_tol > 0.0).then_some(trunc.prune_tol * reference);
        let maps = (0..group.letter_count() as u32).map(|l| group.letter_map(Letter(l)).entries()).collect();
        let mut walk =
            OrbitWalk { group, maps, s_re, max_len: trunc.max_len, tau, scale, rho, out: OrbitTerms::default() };
        if scale.is_none() {
            walk.out.tail_bound = f64::INFINITY;
        }
        for l in 0..group.letter_count() as u32 {
            let (a, c) = walk.extend(l, x, Complex64::new(1.0, 0.0));
            walk.visit(l, a, c, 1);
        }
        walk.out
    }

    #[inline]
    fn extend(&self, l: u32, a: Complex64, c: Complex64) -> (Complex64, Complex64) {
        let m = &self.maps[l as usize];
        (m[0] * a + m[1] * c, m[2] * a + m[3] * c)
    }

    fn visit(&mut self, first: u32, a: Complex64, c: Complex64, len: usize) {
        let deriv = 1.0 / c.norm_sqr();
        if let (Some(tau), Some(scale)) = (self.tau, self.scale) {
            let bound = deriv.powf(self.s_re) * scale;
            if bound < tau {
                self.out.tail_bound += bound;
                return;
            }
        }
        self.out.vectors.push((a, c));
        if len == self.max_len {
            if let Some(scale) = self.scale {
                self.out.tail_bound += deriv.powf(self.s_re) * scale * self.rho;
            }
            return;
        }
        let forbidden = Letter(first).inverse().0;
        for l in 0..self.group.letter_count() as u32 {
            if l == forbidden {
                continue;
            }
            let (a2, c2) = self.extend(l, a, c);
            self.visit(l, a2, c2, len + 1);
        }
    }
}

/// Kernel value with its truncation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    /// Bound on the omitted part of the series (pruned subtrees and words
    /// beyond `max_len`); infinite when no geometric bound applies.
    pub tail_bound: f64,
    /// Number of non-identity words summed.
    pub terms: usize,
}

fn check_points(group: &SchottkyGroup, pts: &[Complex64]) -> Result<(), ScatteringError> {
    if let Some(r) = group.rect() {
        for z in pts {
            if !r.contains(*z) {
                return Err(ScatteringError::OutsideRect(*z));
            }
        }
    }
    Ok(())
}

fn sum_terms(terms: &OrbitTerms, y: Complex64, s: Complex64) -> Result<Complex64, ScatteringError> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, c) in &terms.vectors {
        let diff = a - y * c;
        let q = diff.norm_sqr();
        let sep = (q / c.norm_sqr()).sqrt();
        if !(sep > 1e-12) {
            return Err(ScatteringError::OrbitCollision(sep));
        }
        acc += pow_neg(q, s);
    }
    Ok(acc)
}

/// `S(s; x, y)` summed over the (pruned) word ball.
pub fn kernel_value(
    group: &SchottkyGroup,
    s: &SpectralParam,
    x: Complex64,
    y: Complex64,
    trunc: Truncation,
) -> Result<KernelValue, ScatteringError> {
    s.require_convergent()?;
    if x == y {
        return Err(ScatteringError::DiagonalSingularity(x));
    }
    check_points(group, &[x, y])?;
    let q0 = (x - y).norm_sqr();
    let identity = pow_neg(q0, s.s);
    let reference = q0.powf(-s.s.re);
    let terms = OrbitWalk::run(group, &Contraction::of(group), x, group.circle_gap(y), s.s.re, trunc, reference);
    let rest = sum_terms(&terms, y, s.s)?;
    Ok(KernelValue { value: identity + rest, tail_bound: terms.tail_bound, terms: terms.vectors.len() })
}

/// The smooth part `S(s; x, y) − |x − y|^{−2s}` (non-identity words only),
/// defined also at `x = y`.
pub fn kernel_remainder(
    group: &SchottkyGroup,
    s: &SpectralParam,
    x: Complex64,
    y: Complex64,
    trunc: Truncation,
) -> Result<KernelValue, ScatteringError> {
    s.require_convergent()?;
    check_points(group, &[x, y])?;
    let reference = first_level_scale(group, x, &[y], s.s.re);
    let terms = OrbitWalk::run(group, &Contraction::of(group), x, group.circle_gap(y), s.s.re, trunc, reference);
    let value = sum_terms(&terms, y, s.s)?;
    Ok(KernelValue { value, tail_bound: terms.tail_bound, terms: terms.vectors.len() })
}

/// Largest single-letter term `|l'(x)|^{Re s}/|lx − y|^{2 Re s}` over the
/// given targets; the natural magnitude of the remainder.
pub(crate) fn first_level_scale(group: &SchottkyGroup, x: Complex64, ys: &[Complex64], s_re: f64) -> f64 {
    let mut best = 0.0f64;
    for l in 0..group.letter_count() as u32 {
        let m = group.letter_map(Letter(l)).entries();
        let (a, c) = (m[0] * x + m[1], m[2] * x + m[3]);
        for y in ys {
            best = best.max((a - y * c).norm_sqr().powf(-s_re));
        }
    }
    best
}

/// Which variable the automorphy law is tested in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutomorphyReport {
    /// `|S_N(γx, y)|γ'(x)|^s − S_N(x, y)|` (or the `y` analogue).
    pub residual: f64,
    pub transformed: Complex64,
    pub direct: Complex64,
    /// Bound on words beyond the ball for the direct sum.
    pub tail_bound: f64,
}

/// Automorphy of the truncated kernel with truncation matching.
///
/// The direct side sums `T(u; x, y)` over the full ball `ℓ(u) ≤ N`. In `x`
/// the transformed side sums `T(w; γx, y)|γ'(x)|^s` over `w = uγ⁻¹`; in `y`
/// it sums `T(w; x, γy)|γ'(y)|^s` over `w = γu`. Both are re-indexings of
/// the same terms, so the residual measures roundoff only.
pub fn check_automorphy(
    group: &SchottkyGroup,
    s: &SpectralParam,
    x: Complex64,
    y: Complex64,
    gamma: &GroupWord,
    max_len: usize,
    variable: Variable,
) -> Result<AutomorphyReport, ScatteringError> {
    s.require_convergent()?;
    if x == y {
        return Err(ScatteringError::DiagonalSingularity(x));
    }
    let term = |map: &crate::moebius::MoebiusMap, x: Complex64, y: Complex64| -> Result<Complex64, ScatteringError> {
        let [a, b, c, d] = map.entries();
        let num = a * x + b;
        let den = c * x + d;
        let q = (num - y * den).norm_sqr();
        if !(q > 0.0) {
            return Err(ScatteringError::OrbitCollision(0.0));
        }
        Ok(pow_neg(q, s.s))
    };
    let ginv = group.inverse_word(gamma);
    let mut direct = Complex64::new(0.0, 0.0);
    let mut transformed = Complex64::new(0.0, 0.0);
    let (gx, gy) = match variable {
        Variable::X => (gamma.map.apply_finite(x).map_err(crate::kleinian::KleinianError::from)?, y),
        Variable::Y => (x, gamma.map.apply_finite(y).map_err(crate::kleinian::KleinianError::from)?),
    };
    let jac = match variable {
        Variable::X => gamma.map.conformal_dilation(x),
        Variable::Y => gamma.map.conformal_dilation(y),
    }
    .map_err(crate::kleinian::KleinianError::from)?;
    let jac_s = super::pow_real_complex(jac, s.s);
    let contraction = Contraction::of(group);
    let rho = contraction.rho(group, s.s.re);
    let gap = group.circle_gap(y);
    let mut tail = if group.letter_count() == 0 || (rho < 1.0 && gap > 0.0 && group.circle_gap(x) > 0.0) {
        0.0
    } else {
        f64::INFINITY
    };
    for u in group.enumerate_words(max_len) {
        direct += term(&u.map, x, y)?;
        let w = match variable {
            Variable::X => group.multiply(&u, &ginv),
            Variable::Y => group.multiply(gamma, &u),
        };
        transformed += term(&w.map, gx, gy)? * jac_s;
        if u.len() == max_len && tail.is_finite() {
            let deriv = u.map.conformal_dilation(x).map_err(crate::kleinian::KleinianError::from)?;
            tail += deriv.powf(s.s.re) * rho / ((1.0 - rho) * gap.powf(2.0 * s.s.re));
        }
    }
    Ok(AutomorphyReport { residual: (transformed - direct).norm(), transformed, direct, tail_bound: tail })
}
