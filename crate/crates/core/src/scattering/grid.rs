//! Quadrature grids on the truncated fundamental domain.
//!
//! Every node carries a weight and a parallelogram cell `x + L·[-½, ½]²`.
//! Tensor grids clip midpoint cells against the Schottky disks with exact
//! areas; push-forwards map nodes, scale weights by `det Dψ` and cells by
//! `Dψ`, so a pulled-back operator is a pure matrix conjugation.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScatteringError;
use crate::kleinian::{Circle, Rect, SchottkyGroup};
use crate::qc::{det, mul, DiffeoField, Mat2};
use crate::quad::GaussLegendre;

/// Gauss–Legendre nodes per cell edge in the finite-part integral.
pub const EDGE_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGrid {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// Cell shape `L_i`: the cell of node `i` is `x_i + L_i·[-½, ½]²`.
    pub cells: Vec<Mat2>,
}

impl NodeGrid {
    pub fn from_parts(nodes: Vec<Complex64>, weights: Vec<f64>, cells: Vec<Mat2>) -> Result<Self, ScatteringError> {
        if nodes.is_empty() || nodes.len() != weights.len() || nodes.len() != cells.len() {
            return Err(ScatteringError::BadGrid(format!(
                "{} nodes, {} weights, {} cells",
                nodes.len(),
                weights.len(),
                cells.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(ScatteringError::BadGrid(format!("non-positive weight {w}")));
        }
        Ok(Self { nodes, weights, cells })
    }

    /// `n × n` midpoint cells of `rect`, clipped to the exterior of the
    /// group's disks. Cells meeting the domain keep their exact clipped
    /// area as weight; the node is the midpoint when it lies in the domain,
    /// otherwise the deepest of an 8×8 sub-sample and four near-corner points.
    pub fn tensor(group: &SchottkyGroup, rect: Rect, n: usize) -> Result<Self, ScatteringError> {
        if n == 0 {
            return Err(ScatteringError::BadGrid("zero nodes per side".into()));
        }
        let circles = group.circles();
        let hx = rect.width() / n as f64;
        let hy = rect.height() / n as f64;
        let cell = [[hx, 0.0], [0.0, hy]];
        let mut nodes = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let x0 = rect.xmin + i as f64 * hx;
                let y0 = rect.ymin + j as f64 * hy;
                let (x1, y1) = (x0 + hx, y0 + hy);
                let removed: f64 = circles.iter().map(|c| rect_disk_area(x0, x1, y0, y1, c)).sum();
                let area = hx * hy - removed;
                if !(area > 1e-14 * hx * hy) {
                    continue;
                }
                let mid = Complex64::new(x0 + 0.5 * hx, y0 + 0.5 * hy);
                let node = if group.circle_gap(mid) > 0.0 { mid } else { deepest_point(group, x0, y0, hx, hy) };
                nodes.push(node);
                weights.push(area);
            }
        }
        let cells = vec![cell; nodes.len()];
        Self::from_parts(nodes, weights, cells)
    }

    /// Exact area of `rect` minus the group's disks.
    pub fn truncated_area(group: &SchottkyGroup, rect: Rect) -> f64 {
        rect.area()
            - group.circles().iter().map(|c| rect_disk_area(rect.xmin, rect.xmax, rect.ymin, rect.ymax, c)).sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Image grid under `ψ`.
    pub fn push_forward(&self, psi: &DiffeoField) -> Result<Self, ScatteringError> {
        let mut nodes = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        let mut cells = Vec::with_capacity(self.len());
        for ((x, w), l) in self.nodes.iter().zip(&self.weights).zip(&self.cells) {
            let jac = psi.jacobian(*x)?;
            let jdet = det(&jac);
            if !(jdet > 0.0) {
                return Err(ScatteringError::BadGrid(format!("det Dψ = {jdet} at {x}")));
            }
            nodes.push(psi.apply(*x)?);
            weights.push(w * jdet);
            cells.push(mul(&jac, l));
        }
        Self::from_parts(nodes, weights, cells)
    }

    /// `det Dψ` at every node.
    pub fn jacobian_dets(&self, psi: &DiffeoField) -> Result<Vec<f64>, ScatteringError> {
        self.nodes.iter().map(|x| Ok(psi.jacobian_det(*x)?)).collect()
    }

    /// Grid inner product `Σ w conj(f) g`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| *w * a.conj() * b).sum()
    }

    pub fn norm(&self, f: &[Complex64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, a)| w * a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest distance between two nodes.
    pub fn diameter(&self) -> f64 {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for z in &self.nodes {
            xmin = xmin.min(z.re);
            xmax = xmax.max(z.re);
            ymin = ymin.min(z.im);
            ymax = ymax.max(z.im);
        }
        ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt()
    }
}

fn deepest_point(group: &SchottkyGroup, x0: f64, y0: f64, hx: f64, hy: f64) -> Complex64 {
    let mut best = Complex64::new(x0 + 0.5 * hx, y0 + 0.5 * hy);
    let mut best_gap = f64::NEG_INFINITY;
    // An 8×8 sub-sample plus points just inside the corners: a sliver cut
    // off by a convex disk always contains a corner.
    let fractions = (0..64)
        .map(|k| ((k % 8) as f64 + 0.5) / 8.0)
        .zip((0..64).map(|k| ((k / 8) as f64 + 0.5) / 8.0))
        .chain([(1e-3, 1e-3), (1.0 - 1e-3, 1e-3), (1e-3, 1.0 - 1e-3), (1.0 - 1e-3, 1.0 - 1e-3)]);
    for (u, v) in fractions {
        let z = Complex64::new(x0 + hx * u, y0 + hy * v);
        let g = group.circle_gap(z);
        if g > best_gap {
            best_gap = g;
            best = z;
        }
    }
    best
}

/// Exact area of `[x0, x1] × [y0, y1] ∩ disk`.
pub fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, c: &Circle) -> f64 {
    let (cx, cy, r) = (c.center.re, c.center.im, c.radius);
    let a = x0.max(cx - r);
    let b = x1.min(cx + r);
    if !(a < b) {
        return 0.0;
    }
    // Antiderivative of sqrt(r² − u²).
    let big_s = |u: f64| {
        let u = u.clamp(-r, r);
        0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
    };
    let half = |x: f64| (r * r - (x - cx).powi(2)).max(0.0).sqrt();
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        let dy = y - cy;
        if dy.abs() < r {
            let w = (r * r - dy * dy).sqrt();
            for x in [cx - w, cx + w] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if !(q > p) {
            continue;
        }
        let m = 0.5 * (p + q);
        let sm = half(m);
        let top_is_rect = y1 <= cy + sm;
        let bottom_is_rect = y0 >= cy - sm;
        let top = if top_is_rect { y1 } else { cy + sm };
        let bottom = if bottom_is_rect { y0 } else { cy - sm };
        if top <= bottom {
            continue;
        }
        // ∫ (top − bottom) dx with each side either a constant or ±s(x).
        let arc = big_s(q - cx) - big_s(p - cx);
        let mut piece = 0.0;
        piece += if top_is_rect { y1 * (q - p) } else { cy * (q - p) + arc };
        piece -= if bottom_is_rect { y0 * (q - p) } else { cy * (q - p) - arc };
        area += piece;
    }
    area.max(0.0)
}

fn edge_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(EDGE_NODES))
}

/// Hadamard finite part of `∫_P |v|^{-2s} dv` over the parallelogram
/// `P = L·[-½, ½]²` (an ordinary integral when `Re s < 1`).
///
/// In polar coordinates the radial integral `∫₀^ρ r^{1−2s} dr` has finite
/// part `ρ^{2−2s}/(2−2s)`; splitting the angle by edges at distance `d`
/// gives `Σ d^{2−2s}/(2−2s) ∫ cos^{2s−2}φ dφ`. Homogeneity makes the
/// result scale exactly as `α^{2−2s}` under `L ↦ αR·L` for rotations `R`.
pub fn finite_part_integral(l: &Mat2, s: Complex64) -> Complex64 {
    let p = 2.0 - 2.0 * s;
    assert!(p.norm() > 0.0, "finite part undefined at s = 1");
    let corner = |u: f64, v: f64| [l[0][0] * u + l[0][1] * v, l[1][0] * u + l[1][1] * v];
    let mut verts = [corner(-0.5, -0.5), corner(0.5, -0.5), corner(0.5, 0.5), corner(-0.5, 0.5)];
    if det(l) < 0.0 {
        verts.reverse();
    }
    let rule = edge_rule();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..4 {
        let a = verts[k];
        let b = verts[(k + 1) % 4];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let t = [t[0] / len, t[1] / len];
        // Outward normal of a counter-clockwise polygon.
        let n = [t[1], -t[0]];
        let d = a[0] * n[0] + a[1] * n[1];
        let phi_a = (a[0] * t[0] + a[1] * t[1]).atan2(d);
        let phi_b = (b[0] * t[0] + b[1] * t[1]).atan2(d);
        let angular: Complex64 = rule.mapped(phi_a, phi_b).map(|(phi, w)| w * (-p * phi.cos().ln()).exp()).sum();
        total += (p * d.ln()).exp() / p * angular;
    }
    total
}
