//! Classical Schottky groups.
//!
//! A group of rank `g` is given by `g` pairings of disjoint circles
//! `(A_k, B_k)`; generator `g_k` carries the exterior of `A_k` onto the
//! interior of `B_k`. Words are sequences of [`Letter`]s, letter `2k` being
//! `g_k` and letter `2k + 1` its inverse. Enumeration is length-lexicographic
//! in that letter order.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moebius::{ExtendedPoint, MapClass, MoebiusError, MoebiusMap};

/// Boundary points used when checking that a generator maps `A` onto `B`.
const BOUNDARY_SAMPLES: usize = 16;
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KleinianError {
    #[error("circles {first} and {second} overlap or touch (gap {gap:e})")]
    OverlappingCircles { first: usize, second: usize, gap: f64 },
    #[error("generator {index} is parabolic (tangent circles)")]
    ParabolicGenerator { index: usize },
    #[error("generator {index} is {class:?}, expected loxodromic")]
    NotLoxodromic { index: usize, class: MapClass },
    #[error("circle {index} has non-positive or non-finite radius {radius}")]
    BadCircle { index: usize, radius: f64 },
    #[error("generator {index} does not map circle A onto circle B (residual {residual:e})")]
    PairingMismatch { index: usize, residual: f64 },
    #[error("a Schottky group needs at least one pairing")]
    EmptyPairings,
    #[error("0 is not in the common exterior of the circles")]
    OriginNotInDomain,
    #[error("map pole lies on or inside circle {index}")]
    PoleInsideCircle { index: usize },
    #[error("truncation at length {max_len} insufficient: a word of that length has displacement {displacement} <= R = {radius}")]
    TruncationInsufficient { max_len: usize, radius: f64, displacement: f64 },
    #[error(transparent)]
    Moebius(#[from] MoebiusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Signed distance from `z` to the circle, positive outside.
    pub fn exterior_distance(&self, z: Complex64) -> f64 {
        (z - self.center).norm() - self.radius
    }

    /// Euclidean gap between two circles; negative when they overlap.
    pub fn gap(&self, other: &Circle) -> f64 {
        (self.center - other.center).norm() - self.radius - other.radius
    }

    pub fn boundary_point(&self, angle: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, angle)
    }

    /// Circle through three points, `None` if they are collinear.
    pub fn through(p: Complex64, q: Complex64, r: Complex64) -> Option<Circle> {
        let (b, c) = (q - p, r - p);
        let d = 2.0 * (b.re * c.im - b.im * c.re);
        if d.abs() < 1e-300 {
            return None;
        }
        let b2 = b.norm_sqr();
        let c2 = c.norm_sqr();
        let ux = (c.im * b2 - b.im * c2) / d;
        let uy = (b.re * c2 - c.re * b2) / d;
        let u = Complex64::new(ux, uy);
        Some(Circle::new(p + u, u.norm()))
    }
}

/// Reference rectangle `[xmin, xmax] x [ymin, ymax]`, serialized as a
/// four-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect { xmin: v[0], xmax: v[1], ymin: v[2], ymax: v[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.xmin, r.xmax, r.ymin, r.ymax]
    }
}

impl Rect {
    /// `None` unless `xmin < xmax` and `ymin < ymax` (all finite).
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Option<Rect> {
        let ok = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) && xmin < xmax && ymin < ymax;
        ok.then_some(Rect { xmin, xmax, ymin, ymax })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.xmin && z.re <= self.xmax && z.im >= self.ymin && z.im <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Distance from an interior point to the rectangle boundary.
    pub fn interior_distance(&self, z: Complex64) -> f64 {
        (z.re - self.xmin).min(self.xmax - z.re).min(z.im - self.ymin).min(self.ymax - z.im)
    }

    fn bounding(points: impl Iterator<Item = Complex64>) -> Rect {
        let mut r = Rect { xmin: f64::INFINITY, xmax: f64::NEG_INFINITY, ymin: f64::INFINITY, ymax: f64::NEG_INFINITY };
        for z in points {
            r.xmin = r.xmin.min(z.re);
            r.xmax = r.xmax.max(z.re);
            r.ymin = r.ymin.min(z.im);
            r.ymax = r.ymax.max(z.im);
        }
        r
    }
}

/// A pair of circles and the generator identifying them.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePairing {
    pub a: Circle,
    pub b: Circle,
    /// Rotation of the marked-point identification, when the generator was
    /// built from the circle recipe.
    pub theta: Option<f64>,
    pub generator: MoebiusMap,
}

impl CirclePairing {
    /// The standard pairing `z -> c_B - e^{i theta} u^2 r_A r_B / (z - c_A)`,
    /// with `u` the unit vector from `c_A` to `c_B`. It is inversion in `A`
    /// followed by the orientation-reversing similarity carrying `A` to `B`;
    /// at `theta = 0` the points of `A` and `B` facing each other correspond.
    pub fn from_circles(a: Circle, b: Circle, theta: f64) -> Result<Self, KleinianError> {
        let sep = b.center - a.center;
        if sep.norm() == 0.0 {
            return Err(KleinianError::OverlappingCircles { first: 0, second: 1, gap: a.gap(&b) });
        }
        let u = sep / sep.norm();
        let k = Complex64::from_polar(1.0, theta) * u * u * (a.radius * b.radius);
        let one = Complex64::new(1.0, 0.0);
        let generator = MoebiusMap::new(b.center, -b.center * a.center - k, one, -a.center)?;
        Ok(Self { a, b, theta: Some(theta), generator })
    }

    /// Pairing with an explicitly supplied generator.
    pub fn with_generator(a: Circle, b: Circle, generator: MoebiusMap) -> Self {
        Self { a, b, theta: None, generator }
    }

    /// Largest deviation of `g(A)` from `B` over sampled boundary points.
    pub fn boundary_residual(&self) -> f64 {
        (0..BOUNDARY_SAMPLES)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / BOUNDARY_SAMPLES as f64;
                match self.generator.apply(self.a.boundary_point(t).into()) {
                    ExtendedPoint::Finite(w) => ((w - self.b.center).norm() - self.b.radius).abs(),
                    ExtendedPoint::Infinity => f64::INFINITY,
                }
            })
            .fold(0.0, f64::max)
    }
}

/// One letter of a word: `2k` is generator `k`, `2k + 1` its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u32);

impl Letter {
    pub fn generator(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inverse() {
            write!(f, "g{}^-1", self.generator() + 1)
        } else {
            write!(f, "g{}", self.generator() + 1)
        }
    }
}

/// A reduced word together with its matrix. The word `l_1 l_2 ... l_n`
/// denotes the map that applies `l_n` first.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWord {
    pub letters: Vec<Letter>,
    pub map: MoebiusMap,
}

impl GroupWord {
    pub fn identity() -> Self {
        Self { letters: Vec::new(), map: MoebiusMap::IDENTITY }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "id");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A Schottky group given by circle pairings, plus an optional reference
/// rectangle that truncates the fundamental domain for quadrature.
#[derive(Debug, Clone)]
pub struct SchottkyGroup {
    pairings: Vec<CirclePairing>,
    rect: Option<Rect>,
    letter_maps: Vec<MoebiusMap>,
}

impl SchottkyGroup {
    /// Validates pairings: positive radii, loxodromic generators mapping each
    /// `A` onto its `B`, pairwise disjoint circles, and `0` in the common
    /// exterior.
    pub fn build(pairings: Vec<CirclePairing>, rect: Option<Rect>) -> Result<Self, KleinianError> {
        if pairings.is_empty() {
            return Err(KleinianError::EmptyPairings);
        }
        let group = Self::assemble(pairings, rect)?;
        if !group.in_fundamental_domain(ExtendedPoint::finite(0.0, 0.0)) {
            return Err(KleinianError::OriginNotInDomain);
        }
        Ok(group)
    }

    /// Builds from `(A, B, theta)` triples using the standard pairing recipe.
    pub fn from_circle_pairs(pairs: &[(Circle, Circle, f64)], rect: Option<Rect>) -> Result<Self, KleinianError> {
        for (i, (a, b, _)) in pairs.iter().enumerate() {
            for (j, c) in [(2 * i, a), (2 * i + 1, b)] {
                if !(c.radius > 0.0 && c.radius.is_finite()) {
                    return Err(KleinianError::BadCircle { index: j, radius: c.radius });
                }
            }
        }
        let pairings =
            pairs.iter().map(|&(a, b, t)| CirclePairing::from_circles(a, b, t)).collect::<Result<Vec<_>, _>>()?;
        Self::build(pairings, rect)
    }

    /// The group with no generators.
    pub fn trivial(rect: Option<Rect>) -> Self {
        Self { pairings: Vec::new(), rect, letter_maps: Vec::new() }
    }

    fn assemble(pairings: Vec<CirclePairing>, rect: Option<Rect>) -> Result<Self, KleinianError> {
        for (k, p) in pairings.iter().enumerate() {
            for (j, c) in [(2 * k, &p.a), (2 * k + 1, &p.b)] {
                if !(c.radius > 0.0 && c.radius.is_finite()) {
                    return Err(KleinianError::BadCircle { index: j, radius: c.radius });
                }
            }
            match p.generator.classify() {
                MapClass::Loxodromic => {}
                MapClass::Parabolic => return Err(KleinianError::ParabolicGenerator { index: k }),
                class => return Err(KleinianError::NotLoxodromic { index: k, class }),
            }
            let residual = p.boundary_residual();
            if !(residual <= BOUNDARY_TOL * (1.0 + p.b.radius)) {
                return Err(KleinianError::PairingMismatch { index: k, residual });
            }
        }
        let circles: Vec<Circle> = pairings.iter().flat_map(|p| [p.a, p.b]).collect();
        for i in 0..circles.len() {
            for j in i + 1..circles.len() {
                let gap = circles[i].gap(&circles[j]);
                if !(gap > 0.0) {
                    return Err(KleinianError::OverlappingCircles { first: i, second: j, gap });
                }
            }
        }
        let letter_maps = pairings.iter().flat_map(|p| [p.generator, p.generator.inverse()]).collect();
        Ok(Self { pairings, rect, letter_maps })
    }

    /// The conjugate group `h G h^-1`, with circles carried along by `h`.
    /// The pole of `h` must lie strictly outside every circle.
    pub fn conjugate(&self, h: &MoebiusMap) -> Result<Self, KleinianError> {
        let map_circle = |c: &Circle, index: usize| -> Result<Circle, KleinianError> {
            if let Some(p) = h.pole() {
                if c.exterior_distance(p) <= 0.0 {
                    return Err(KleinianError::PoleInsideCircle { index });
                }
            }
            let pts: Vec<Complex64> =
                [0.0, 2.0, 4.0].iter().map(|t| h.apply_finite(c.boundary_point(*t))).collect::<Result<_, _>>()?;
            Ok(Circle::through(pts[0], pts[1], pts[2]).expect("Moebius image of a circle"))
        };
        let pairings = self
            .pairings
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Ok(CirclePairing {
                    a: map_circle(&p.a, 2 * k)?,
                    b: map_circle(&p.b, 2 * k + 1)?,
                    theta: p.theta,
                    generator: p.generator.conjugate_by(h),
                })
            })
            .collect::<Result<Vec<_>, KleinianError>>()?;
        let rect = match self.rect {
            Some(r) => Some(Rect::bounding(
                rect_boundary(&r, 64).map(|z| h.apply_finite(z)).collect::<Result<Vec<_>, _>>()?.into_iter(),
            )),
            None => None,
        };
        if pairings.is_empty() {
            return Ok(Self::trivial(rect));
        }
        Self::assemble(pairings, rect)
    }

    pub fn rank(&self) -> usize {
        self.pairings.len()
    }

    pub fn pairings(&self) -> &[CirclePairing] {
        &self.pairings
    }

    pub fn rect(&self) -> Option<Rect> {
        self.rect
    }

    pub fn with_rect(mut self, rect: Option<Rect>) -> Self {
        self.rect = rect;
        self
    }

    /// All `2g` circles in the order `A_1, B_1, A_2, B_2, ...`.
    pub fn circles(&self) -> Vec<Circle> {
        self.pairings.iter().flat_map(|p| [p.a, p.b]).collect()
    }

    pub fn generators(&self) -> Vec<MoebiusMap> {
        self.pairings.iter().map(|p| p.generator).collect()
    }

    pub fn letter_count(&self) -> usize {
        self.letter_maps.len()
    }

    pub fn letter_map(&self, l: Letter) -> &MoebiusMap {
        &self.letter_maps[l.0 as usize]
    }

    /// Circle whose interior receives the image of the domain under `l`:
    /// `B_k` for `g_k`, `A_k` for `g_k^-1`.
    pub fn target_circle(&self, l: Letter) -> Circle {
        let p = &self.pairings[l.generator()];
        if l.is_inverse() {
            p.a
        } else {
            p.b
        }
    }

    /// Strict exterior of every circle, and inside the rectangle when set.
    pub fn in_fundamental_domain(&self, z: ExtendedPoint) -> bool {
        match z {
            ExtendedPoint::Infinity => self.rect.is_none(),
            ExtendedPoint::Finite(z) => {
                self.rect.is_none_or(|r| r.contains(z)) && self.circles().iter().all(|c| c.exterior_distance(z) > 0.0)
            }
        }
    }

    /// Distance from `z` to the nearest circle.
    pub fn circle_gap(&self, z: Complex64) -> f64 {
        self.circles().iter().map(|c| c.exterior_distance(z)).fold(f64::INFINITY, f64::min)
    }

    /// Every reduced word of length at most `max_len`, identity first.
    pub fn enumerate_words(&self, max_len: usize) -> WordIter<'_> {
        WordIter::new(self, max_len)
    }

    /// Number of reduced words of length at most `max_len`.
    pub fn word_count(&self, max_len: usize) -> usize {
        let n = self.letter_count();
        if n == 0 {
            return 1;
        }
        let mut total = 1usize;
        let mut shell = n;
        for _ in 0..max_len {
            total += shell;
            shell *= n - 1;
        }
        total
    }

    /// Reduced product of two words (cancelling at the junction).
    pub fn multiply(&self, left: &GroupWord, right: &GroupWord) -> GroupWord {
        let mut letters = left.letters.clone();
        for &l in &right.letters {
            if letters.last() == Some(&l.inverse()) {
                letters.pop();
            } else {
                letters.push(l);
            }
        }
        self.word_from_letters(&letters)
    }

    pub fn inverse_word(&self, w: &GroupWord) -> GroupWord {
        let letters: Vec<Letter> = w.letters.iter().rev().map(|l| l.inverse()).collect();
        GroupWord { letters, map: w.map.inverse() }
    }

    pub fn word_from_letters(&self, letters: &[Letter]) -> GroupWord {
        let map = letters.iter().fold(MoebiusMap::IDENTITY, |m, &l| m.compose(self.letter_map(l)));
        GroupWord { letters: letters.to_vec(), map }
    }

    /// Base-point displacements of every word up to `max_len`, sorted, and
    /// the smallest displacement among words of length exactly `max_len`.
    pub fn displacements(&self, max_len: usize) -> (Vec<f64>, f64) {
        let mut shell_min = f64::INFINITY;
        let mut all = Vec::with_capacity(self.word_count(max_len));
        for w in self.enumerate_words(max_len) {
            let rho = w.map.base_displacement();
            if w.len() == max_len {
                shell_min = shell_min.min(rho);
            }
            all.push(rho);
        }
        all.sort_by(f64::total_cmp);
        (all, shell_min)
    }

    /// `N(R) = #{gamma : rho(j, gamma j) <= R}` over words up to `max_len`.
    ///
    /// Fails unless every word of length `max_len` is displaced beyond `R`.
    pub fn orbital_count(&self, radius: f64, max_len: usize) -> Result<usize, KleinianError> {
        let (all, shell_min) = self.displacements(max_len);
        if self.rank() > 0 && shell_min <= radius {
            return Err(KleinianError::TruncationInsufficient { max_len, radius, displacement: shell_min });
        }
        Ok(all.partition_point(|&r| r <= radius))
    }
}

fn rect_boundary(r: &Rect, per_side: usize) -> impl Iterator<Item = Complex64> + '_ {
    (0..per_side).flat_map(move |i| {
        let t = i as f64 / per_side as f64;
        let x = r.xmin + t * r.width();
        let y = r.ymin + t * r.height();
        [
            Complex64::new(x, r.ymin),
            Complex64::new(r.xmax, y),
            Complex64::new(r.xmax - t * r.width(), r.ymax),
            Complex64::new(r.xmin, r.ymax - t * r.height()),
        ]
    })
}

/// Length-lexicographic iterator over reduced words.
pub struct WordIter<'a> {
    group: &'a SchottkyGroup,
    max_len: usize,
    len: usize,
    letters: Vec<Letter>,
    // prefix[k] is the product of letters[0..=k]
    prefix: Vec<MoebiusMap>,
    done: bool,
    started: bool,
}

impl<'a> WordIter<'a> {
    fn new(group: &'a SchottkyGroup, max_len: usize) -> Self {
        Self { group, max_len, len: 0, letters: Vec::new(), prefix: Vec::new(), done: false, started: false }
    }

    fn next_valid(&self, pos: usize, from: u32) -> Option<Letter> {
        let n = self.group.letter_count() as u32;
        let forbidden = if pos == 0 { None } else { Some(self.letters[pos - 1].inverse()) };
        (from..n).map(Letter).find(|l| Some(*l) != forbidden)
    }

    fn fill_from(&mut self, pos: usize) {
        self.letters.truncate(pos);
        self.prefix.truncate(pos);
        for p in pos..self.len {
            let l = self.next_valid(p, 0).expect("rank >= 1 always has a next letter");
            self.letters.push(l);
            let m =
                if p == 0 { *self.group.letter_map(l) } else { self.prefix[p - 1].compose(self.group.letter_map(l)) };
            self.prefix.push(m);
        }
    }

    fn advance(&mut self) -> bool {
        let mut pos = self.len;
        while pos > 0 {
            pos -= 1;
            if let Some(l) = self.next_valid(pos, self.letters[pos].0 + 1) {
                self.letters.truncate(pos);
                self.prefix.truncate(pos);
                self.letters.push(l);
                let m = if pos == 0 {
                    *self.group.letter_map(l)
                } else {
                    self.prefix[pos - 1].compose(self.group.letter_map(l))
                };
                self.prefix.push(m);
                self.fill_from(pos + 1);
                return true;
            }
        }
        false
    }
}

impl Iterator for WordIter<'_> {
    type Item = GroupWord;

    fn next(&mut self) -> Option<GroupWord> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            if self.max_len == 0 || self.group.letter_count() == 0 {
                self.done = true;
            }
            return Some(GroupWord::identity());
        }
        let moved = if self.len == 0 { false } else { self.advance() };
        if !moved {
            self.len += 1;
            if self.len > self.max_len {
                self.done = true;
                return None;
            }
            self.fill_from(0);
        }
        Some(GroupWord { letters: self.letters.clone(), map: self.prefix[self.len - 1] })
    }
}

/// An isomorphism `Gamma_1 -> Gamma_2` given on generators.
#[derive(Debug, Clone)]
pub struct GroupIsomorphism {
    pub image: SchottkyGroup,
    /// `assignment[k]` is the image generator of generator `k`.
    pub assignment: Vec<usize>,
}

impl GroupIsomorphism {
    /// `Gamma_2 = h Gamma_1 h^-1` with generator `k` sent to its conjugate.
    pub fn conjugation(source: &SchottkyGroup, h: &MoebiusMap) -> Result<Self, KleinianError> {
        Ok(Self { image: source.conjugate(h)?, assignment: (0..source.rank()).collect() })
    }

    /// Image group for a general point map `f`: every circle is replaced by
    /// the circle through the images of three of its boundary points, and
    /// paired with the standard recipe at the source pairing's `theta`.
    /// For a non-conformal `f` this is a stand-in, since `f g f^-1` is not
    /// Möbius.
    pub fn circle_images<F>(source: &SchottkyGroup, f: F) -> Result<Self, KleinianError>
    where
        F: Fn(Complex64) -> Option<Complex64>,
    {
        let image_circle = |c: &Circle, index: usize| -> Result<Circle, KleinianError> {
            let pts: Option<Vec<Complex64>> = [0.0, 2.0, 4.0].iter().map(|t| f(c.boundary_point(*t))).collect();
            pts.and_then(|p| Circle::through(p[0], p[1], p[2]))
                .ok_or(KleinianError::BadCircle { index, radius: f64::NAN })
        };
        let mut pairs = Vec::with_capacity(source.rank());
        for (k, p) in source.pairings().iter().enumerate() {
            pairs.push(CirclePairing::from_circles(
                image_circle(&p.a, 2 * k)?,
                image_circle(&p.b, 2 * k + 1)?,
                p.theta.unwrap_or(0.0),
            )?);
        }
        let rect = match source.rect() {
            Some(r) => {
                let pts: Option<Vec<Complex64>> = rect_boundary(&r, 64).map(&f).collect();
                Some(Rect::bounding(
                    pts.ok_or(KleinianError::BadCircle { index: usize::MAX, radius: f64::NAN })?.into_iter(),
                ))
            }
            None => None,
        };
        let image = if pairs.is_empty() { SchottkyGroup::trivial(rect) } else { SchottkyGroup::assemble(pairs, rect)? };
        Ok(Self { image, assignment: (0..source.rank()).collect() })
    }

    /// Image of a word of the source group.
    pub fn map_word(&self, w: &GroupWord) -> GroupWord {
        let letters: Vec<Letter> = w
            .letters
            .iter()
            .map(|l| {
                let g = self.assignment[l.generator()] as u32;
                Letter(2 * g + u32::from(l.is_inverse()))
            })
            .collect();
        self.image.word_from_letters(&letters)
    }

    /// Largest `|f(w z) - phi(w)(f z)|` over words of length at most
    /// `max_len` and the given sample points; small iff `f` intertwines the
    /// two actions.
    pub fn equivariance_residual<F>(&self, source: &SchottkyGroup, f: F, samples: &[Complex64], max_len: usize) -> f64
    where
        F: Fn(Complex64) -> Option<Complex64>,
    {
        let mut worst = 0.0f64;
        for w in source.enumerate_words(max_len) {
            let w2 = self.map_word(&w);
            for &z in samples {
                let lhs = w.map.apply(z.into()).as_finite().and_then(&f);
                let rhs = f(z).and_then(|fz| w2.map.apply(fz.into()).as_finite());
                if let (Some(l), Some(r)) = (lhs, rhs) {
                    worst = worst.max((l - r).norm() / (1.0 + l.norm()));
                }
            }
        }
        worst
    }
}

/// JSON form of a group definition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupSpec {
    pub pairings: Vec<PairingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<Rect>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairingSpec {
    #[serde(rename = "A")]
    pub a: CircleSpec,
    #[serde(rename = "B")]
    pub b: CircleSpec,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl From<CircleSpec> for Circle {
    fn from(c: CircleSpec) -> Self {
        Circle::new(Complex64::new(c.center[0], c.center[1]), c.radius)
    }
}

impl From<Circle> for CircleSpec {
    fn from(c: Circle) -> Self {
        CircleSpec { center: [c.center.re, c.center.im], radius: c.radius }
    }
}

impl GroupSpec {
    pub fn build(&self) -> Result<SchottkyGroup, KleinianError> {
        let pairs: Vec<(Circle, Circle, f64)> =
            self.pairings.iter().map(|p| (p.a.into(), p.b.into(), p.theta)).collect();
        SchottkyGroup::from_circle_pairs(&pairs, self.rect)
    }
}

/// Example groups used by tests, the acceptance suite and the CLI docs.
pub mod examples {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub const EXAMPLE_RECT: Rect = Rect { xmin: -1.5, xmax: 1.5, ymin: -1.5, ymax: 1.5 };

    /// Circles `|z - 3| = 1` and `|z + 3| = 1`.
    pub fn rank1() -> SchottkyGroup {
        SchottkyGroup::from_circle_pairs(
            &[(Circle::new(c(3.0, 0.0), 1.0), Circle::new(c(-3.0, 0.0), 1.0), 0.0)],
            Some(EXAMPLE_RECT),
        )
        .expect("rank-1 example is valid")
    }

    /// Circles of radius `r` centred at `3, -3` and `3i, -3i`.
    pub fn rank2_with_radius(r: f64) -> Result<SchottkyGroup, KleinianError> {
        SchottkyGroup::from_circle_pairs(
            &[
                (Circle::new(c(3.0, 0.0), r), Circle::new(c(-3.0, 0.0), r), 0.0),
                (Circle::new(c(0.0, 3.0), r), Circle::new(c(0.0, -3.0), r), 0.0),
            ],
            Some(EXAMPLE_RECT),
        )
    }

    pub fn rank2() -> SchottkyGroup {
        rank2_with_radius(1.0).expect("rank-2 example is valid")
    }
}
