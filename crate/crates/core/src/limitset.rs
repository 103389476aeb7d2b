//! Limit-set samples, box-counting dimension, and the exponent of
//! convergence estimated from orbital growth.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kleinian::{KleinianError, SchottkyGroup};
use crate::moebius::ExtendedPoint;

/// Dyadic box sizes `2^-k` of the sample extent, `k` in this range.
pub const DYADIC_LEVELS: std::ops::RangeInclusive<i32> = 3..=10;
pub const MIN_POINTS: usize = 100;
pub const MIN_SCALES: usize = 5;
/// Resolution used to deduplicate sampled points.
pub const DEDUP_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("word length must be at least 1")]
    ZeroWordLength,
    #[error("point set spans too few dyadic scales ({usable} usable, need {MIN_SCALES})")]
    DegenerateRange { usable: usize },
    #[error("box counting needs at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Kleinian(#[from] KleinianError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSample {
    pub points: Vec<Complex64>,
    pub word_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub dimension: f64,
    pub stderr: f64,
    /// Box sizes used in the fit.
    pub scales: Vec<f64>,
    #[serde(default)]
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub delta: f64,
    pub stderr: f64,
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Attracting fixed points of every reduced word of length exactly
/// `word_len`, deduplicated.
pub fn sample_limit_set(group: &SchottkyGroup, word_len: usize) -> Result<LimitSample, LimitError> {
    if word_len == 0 {
        return Err(LimitError::ZeroWordLength);
    }
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for w in group.enumerate_words(word_len).filter(|w| w.len() == word_len) {
        if let ExtendedPoint::Finite(z) = w.map.attracting_fixed_point() {
            let key = ((z.re / DEDUP_RESOLUTION).round() as i64, (z.im / DEDUP_RESOLUTION).round() as i64);
            if seen.insert(key) {
                points.push(z);
            }
        }
    }
    Ok(LimitSample { points, word_len })
}

/// Box-counting dimension over dyadic sizes `2^-3 .. 2^-10` of the sample
/// extent (larger side of the bounding box), with the grid anchored at the
/// origin. Sizes at which every point already has its own box are dropped.
pub fn box_dimension(points: &[Complex64]) -> Result<DimensionEstimate, LimitError> {
    let n = points.len();
    if n < 2 {
        return Err(LimitError::DegenerateRange { usable: 0 });
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in points {
        xmin = xmin.min(z.re);
        xmax = xmax.max(z.re);
        ymin = ymin.min(z.im);
        ymax = ymax.max(z.im);
    }
    let extent = (xmax - xmin).max(ymax - ymin);
    if !(extent > 0.0) {
        return Err(LimitError::DegenerateRange { usable: 0 });
    }
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    for k in DYADIC_LEVELS {
        let size = extent * 2f64.powi(-k);
        let boxes: HashSet<(i64, i64)> =
            points.iter().map(|z| ((z.re / size).floor() as i64, (z.im / size).floor() as i64)).collect();
        if boxes.len() < n {
            scales.push(size);
            counts.push(boxes.len());
        }
    }
    if scales.len() < MIN_SCALES {
        return Err(LimitError::DegenerateRange { usable: scales.len() });
    }
    if n < MIN_POINTS {
        return Err(LimitError::TooFewPoints(n));
    }
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, stderr) = linear_fit(&xs, &ys);
    Ok(DimensionEstimate { dimension: slope.clamp(0.0, 2.0), stderr, scales, counts })
}

/// Dimension of the limit set. Rank-0 and rank-1 groups are elementary
/// (empty or two-point limit sets) and get dimension 0 exactly; otherwise
/// box counting on the fixed-point sample.
pub fn limit_set_dimension(
    group: &SchottkyGroup,
    word_len: usize,
) -> Result<(LimitSample, DimensionEstimate), LimitError> {
    let sample = sample_limit_set(group, word_len)?;
    if group.rank() <= 1 {
        let est = DimensionEstimate { dimension: 0.0, stderr: 0.0, scales: Vec::new(), counts: Vec::new() };
        return Ok((sample, est));
    }
    let est = box_dimension(&sample.points)?;
    Ok((sample, est))
}

/// Slope of `log N(R)` against `R` over 33 radii in `[R_max/2, R_max]`,
/// clamped to `[0, 2]`.
pub fn exponent_of_convergence(
    group: &SchottkyGroup,
    r_max: f64,
    max_len: usize,
) -> Result<ExponentEstimate, LimitError> {
    let (all, shell_min) = group.displacements(max_len);
    if group.rank() > 0 && shell_min <= r_max {
        return Err(KleinianError::TruncationInsufficient { max_len, radius: r_max, displacement: shell_min }.into());
    }
    const SAMPLES: usize = 33;
    let radii: Vec<f64> = (0..SAMPLES).map(|i| r_max * (0.5 + 0.5 * i as f64 / (SAMPLES - 1) as f64)).collect();
    let counts: Vec<usize> = radii.iter().map(|&r| all.partition_point(|&d| d <= r)).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, stderr) = linear_fit(&radii, &ys);
    Ok(ExponentEstimate { delta: slope.clamp(0.0, 2.0), stderr, radii, counts })
}

/// Least-squares slope and its standard error.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

/// Middle-thirds Cantor set: left endpoints of the `2^level` intervals of
/// the `level`-th construction stage.
pub fn cantor_points(level: u32) -> Vec<Complex64> {
    let mut xs = vec![0.0f64];
    let mut len = 1.0;
    for _ in 0..level {
        len /= 3.0;
        xs = xs.iter().flat_map(|&x| [x, x + 2.0 * len]).collect();
    }
    xs.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kleinian::examples::{rank1, rank2, rank2_with_radius};
    use crate::kleinian::SchottkyGroup;
    use crate::moebius::MoebiusMap;

    #[test]
    fn cantor_dimension() {
        let est = box_dimension(&cantor_points(12)).unwrap();
        let exact = 2f64.ln() / 3f64.ln();
        assert!((est.dimension - exact).abs() < 0.05, "{est:?}");
        assert!(est.scales.len() >= MIN_SCALES);
    }

    #[test]
    fn circle_dimension() {
        let n = 10_000;
        let pts: Vec<Complex64> =
            (0..n).map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / n as f64)).collect();
        let est = box_dimension(&pts).unwrap();
        assert!((est.dimension - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn degenerate_sets() {
        let two = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(box_dimension(&two), Err(LimitError::DegenerateRange { .. })));
        assert!(matches!(box_dimension(&two[..1]), Err(LimitError::DegenerateRange { .. })));
    }

    #[test]
    fn rank1_limit_set_is_two_points() {
        let g = rank1();
        for n in [1, 2, 5] {
            let s = sample_limit_set(&g, n).unwrap();
            assert_eq!(s.points.len(), 2, "word_len {n}");
        }
        let (_, est) = limit_set_dimension(&g, 6).unwrap();
        assert_eq!(est.dimension, 0.0);
        assert!(matches!(sample_limit_set(&g, 0), Err(LimitError::ZeroWordLength)));
    }

    #[test]
    fn rank2_samples_lie_inside_circles() {
        let g = rank2();
        let s = sample_limit_set(&g, 6).unwrap();
        assert!(s.points.len() <= 4 * 3usize.pow(5));
        let circles = g.circles();
        for z in &s.points {
            assert!(circles.iter().any(|c| c.exterior_distance(*z) < 0.0));
        }
        let s1 = sample_limit_set(&g, 1).unwrap();
        assert_eq!(s1.points.len(), 4);
        for (z, gen) in s1.points.iter().zip(g.pairings().iter().flat_map(|p| [p.generator, p.generator.inverse()])) {
            assert_eq!(ExtendedPoint::Finite(*z), gen.attracting_fixed_point());
        }
    }

    #[test]
    fn rank1_exponent_is_zero() {
        let est = exponent_of_convergence(&rank1(), 60.0, 18).unwrap();
        assert!(est.delta < 0.05, "{est:?}");
    }

    #[test]
    fn small_circles_have_small_exponent_and_shrink_further() {
        let big = exponent_of_convergence(&rank2_with_radius(0.1).unwrap(), 50.0, 7).unwrap();
        let small = exponent_of_convergence(&rank2_with_radius(0.05).unwrap(), 50.0, 6).unwrap();
        assert!(big.delta < 1.0, "{big:?}");
        assert!(small.delta < big.delta, "{small:?} vs {big:?}");
    }

    #[test]
    fn truncation_error_propagates() {
        assert!(matches!(
            exponent_of_convergence(&rank2(), 50.0, 2),
            Err(LimitError::Kleinian(KleinianError::TruncationInsufficient { .. }))
        ));
    }

    /// Circles of radius 1.8 fill enough of the dyadic range for box
    /// counting to be informative; with small circles every point saturates
    /// its own cluster before the finest scale.
    fn wide_group() -> SchottkyGroup {
        rank2_with_radius(1.8).unwrap()
    }

    #[test]
    fn dimension_is_moebius_invariant() {
        let s = sample_limit_set(&wide_group(), 8).unwrap();
        let base = box_dimension(&s.points).unwrap();
        let maps = [
            [1.0, 0.2, 0.3, 0.0, 0.02, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.01, 0.0, 1.0, 0.0],
            [1.0, 0.2, 0.2, 0.1, 0.05, 0.0, 1.0, 0.0],
        ];
        for m in maps {
            let h = MoebiusMap::from_reals(m).unwrap();
            let moved: Vec<Complex64> = s.points.iter().map(|z| h.apply_finite(*z).unwrap()).collect();
            let est = box_dimension(&moved).unwrap();
            assert!((est.dimension - base.dimension).abs() < base.stderr + est.stderr, "{base:?} {est:?}");
        }
    }

    #[test]
    fn exponent_agrees_with_box_dimension() {
        let g = wide_group();
        let (_, boxes) = limit_set_dimension(&g, 8).unwrap();
        let orbital = exponent_of_convergence(&g, 12.0, 11).unwrap();
        assert!(
            (boxes.dimension - orbital.delta).abs() < 2.0 * (boxes.stderr + orbital.stderr),
            "{boxes:?} {orbital:?}"
        );
    }

    #[test]
    fn estimators_are_deterministic() {
        let g = rank2();
        let a = exponent_of_convergence(&g, 12.0, 9).unwrap();
        let b = exponent_of_convergence(&g, 12.0, 9).unwrap();
        assert_eq!(a, b);
        let s = sample_limit_set(&g, 5).unwrap();
        assert_eq!(box_dimension(&s.points).unwrap(), box_dimension(&s.points).unwrap());
    }
}
