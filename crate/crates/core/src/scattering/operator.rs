//! Dense discretizations of scattering operators and their norms.
//!
//! Entries are `M[i][j] = S(s; x_i, x_j)·w_j`, so `M` acts on nodal values
//! and `Σ_j M[i][j] f_j` approximates `∫ S(s; x_i, y) f(y) dy`. The
//! singular part `|x − y|^{−2s}` is integrated over each node's own cell as
//! a Hadamard finite part; the smooth remainder is evaluated at the node
//! pair, and on the diagonal at `y = x` exactly (it is continuous there).

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{finite_part_integral, NodeGrid};
use super::kernel::{first_level_scale, Contraction, OrbitWalk, Truncation};
use super::{pow_neg, pow_real_complex, ScatteringError, SpectralParam};
use crate::kleinian::SchottkyGroup;
use crate::qc::DiffeoField;

/// What a matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// The direct series `S(s)`.
    Direct,
    /// Only the non-identity words `S(s) − |x − y|^{−2s}`.
    Remainder,
    /// `ψ*S₂(s)` on the source grid.
    Pullback,
    /// `S₁(s) − ψ*S₂(s)`.
    Relative,
}

/// Dense row-major complex matrix over a node set with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    /// Row weight; columns carry weight `2 − s`.
    pub s: Complex64,
    pub n: usize,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub data: Vec<Complex64>,
    pub provenance: Provenance,
    pub truncation: Truncation,
}

impl KernelMatrix {
    pub fn new(
        s: Complex64,
        nodes: Vec<Complex64>,
        weights: Vec<f64>,
        data: Vec<Complex64>,
        provenance: Provenance,
        truncation: Truncation,
    ) -> Result<Self, ScatteringError> {
        let n = nodes.len();
        if weights.len() != n || data.len() != n * n {
            return Err(ScatteringError::NodeMismatch(format!(
                "{n} nodes, {} weights, {} entries",
                weights.len(),
                data.len()
            )));
        }
        if let Some(z) = data.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ScatteringError::InvalidArgument(format!("non-finite entry {z}")));
        }
        Ok(Self { s, n, nodes, weights, data, provenance, truncation })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.data.par_chunks(self.n).map(|row| row.iter().zip(f).map(|(m, v)| m * v).sum()).collect()
    }

    /// Adjoint for the inner product `Σ w conj(f) g`:
    /// `M†[j][i] = conj(M[i][j])·w_i/w_j`.
    pub fn weighted_adjoint(&self) -> KernelMatrix {
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.get(i, j).conj() * (self.weights[i] / self.weights[j]);
            }
        }
        KernelMatrix { data, s: Complex64::new(2.0, 0.0) - self.s.conj(), ..self.clone() }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Writes the entries as little-endian `(re, im)` f64 pairs, row-major.
    pub fn write_binary(&self, path: &Path) -> Result<(), ScatteringError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for z in &self.data {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Sidecar metadata (everything except the entries).
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "format": "row-major little-endian complex f64 (re, im)",
            "n": self.n,
            "s": [self.s.re, self.s.im],
            "provenance": self.provenance,
            "truncation": self.truncation,
            "nodes": self.nodes.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "weights": self.weights,
        })
    }
}

/// Orbit vectors of one row in structure-of-arrays form.
struct RowTerms {
    ar: Vec<f64>,
    ai: Vec<f64>,
    cr: Vec<f64>,
    ci: Vec<f64>,
}

impl RowTerms {
    fn new(vectors: &[(Complex64, Complex64)]) -> Self {
        Self {
            ar: vectors.iter().map(|v| v.0.re).collect(),
            ai: vectors.iter().map(|v| v.0.im).collect(),
            cr: vectors.iter().map(|v| v.1.re).collect(),
            ci: vectors.iter().map(|v| v.1.im).collect(),
        }
    }

    /// `Σ |A − yC|^{−2s}`.
    fn sum(&self, y: Complex64, s: Complex64) -> Complex64 {
        let (yr, yi) = (y.re, y.im);
        if s == Complex64::new(3.0, 0.0) {
            let mut acc = 0.0;
            for k in 0..self.ar.len() {
                let re = self.ar[k] - (yr * self.cr[k] - yi * self.ci[k]);
                let im = self.ai[k] - (yr * self.ci[k] + yi * self.cr[k]);
                let q = re * re + im * im;
                acc += 1.0 / (q * q * q);
            }
            Complex64::new(acc, 0.0)
        } else {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..self.ar.len() {
                let re = self.ar[k] - (yr * self.cr[k] - yi * self.ci[k]);
                let im = self.ai[k] - (yr * self.ci[k] + yi * self.cr[k]);
                acc += pow_neg(re * re + im * im, s);
            }
            acc
        }
    }
}

/// Upper triangle (with diagonal) of the symmetric kernel, row by row.
fn assemble_symmetric<F>(
    group: &SchottkyGroup,
    s: &SpectralParam,
    grid: &NodeGrid,
    trunc: Truncation,
    singular: bool,
    diagonal: F,
) -> Result<Vec<Complex64>, ScatteringError>
where
    F: Fn(usize) -> Complex64 + Sync,
{
    s.require_convergent()?;
    let n = grid.len();
    if n == 0 {
        return Err(ScatteringError::BadGrid("empty grid".into()));
    }
    let contraction = Contraction::of(group);
    let gap = grid.nodes.iter().fold(f64::INFINITY, |g, y| g.min(group.circle_gap(*y)));
    let s_re = s.s.re;
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.nodes[i];
            let reference = first_level_scale(group, x, &grid.nodes, s_re);
            let terms = OrbitWalk::run(group, &contraction, x, gap, s_re, trunc, reference);
            let soa = RowTerms::new(&terms.vectors);
            let mut row = Vec::with_capacity(n - i);
            row.push(soa.sum(x, s.s) + diagonal(i));
            for j in i + 1..n {
                let y = grid.nodes[j];
                let mut k = soa.sum(y, s.s);
                if singular {
                    k += pow_neg((x - y).norm_sqr(), s.s);
                }
                row.push(k);
            }
            row
        })
        .collect();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, row) in rows.into_iter().enumerate() {
        // row[0] is the diagonal, already an entry; the rest is the bare
        // kernel, weighted by the column on either side.
        data[i * n + i] = row[0];
        for (off, k) in row.into_iter().enumerate().skip(1) {
            let j = i + off;
            data[i * n + j] = k * grid.weights[j];
            data[j * n + i] = k * grid.weights[i];
        }
    }
    Ok(data)
}

fn check_distinct(grid: &NodeGrid) -> Result<(), ScatteringError> {
    let mut sorted: Vec<(f64, f64)> = grid.nodes.iter().map(|z| (z.re, z.im)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(ScatteringError::BadGrid("repeated node".into()));
    }
    Ok(())
}

/// Discretized `S(s)` on `grid`.
///
/// Diagonal: `FP∫_{cell} |v|^{−2s} dv + R(x_i, x_i)·w_i` where `R` is the
/// non-identity part of the series.
pub fn assemble_operator(
    group: &SchottkyGroup,
    s: &SpectralParam,
    grid: &NodeGrid,
    trunc: Truncation,
) -> Result<KernelMatrix, ScatteringError> {
    check_distinct(grid)?;
    let data = assemble_symmetric(group, s, grid, trunc, true, |i| {
        // the orbit part at y = x is weighted by w_i below
        finite_part_integral(&grid.cells[i], s.s) / grid.weights[i]
    })?;
    let n = grid.len();
    let mut data = data;
    for i in 0..n {
        data[i * n + i] *= grid.weights[i];
    }
    KernelMatrix::new(s.s, grid.nodes.clone(), grid.weights.clone(), data, Provenance::Direct, trunc)
}

/// Discretized smooth part `S(s) − |x − y|^{−2s}` on `grid`.
pub fn assemble_remainder(
    group: &SchottkyGroup,
    s: &SpectralParam,
    grid: &NodeGrid,
    trunc: Truncation,
) -> Result<KernelMatrix, ScatteringError> {
    let data = assemble_symmetric(group, s, grid, trunc, false, |_| Complex64::new(0.0, 0.0))?;
    let n = grid.len();
    let mut data = data;
    for i in 0..n {
        data[i * n + i] *= grid.weights[i];
    }
    KernelMatrix::new(s.s, grid.nodes.clone(), grid.weights.clone(), data, Provenance::Remainder, trunc)
}

/// `ψ*S₂(s)` on the source grid, from `S₂` assembled on the push-forward
/// of `source` under `ψ`.
///
/// With `J = det Dψ` at the source nodes,
/// `P[i][j] = J_i^{s/2} · S₂[i][j] · J_j^{(s−2)/2}`: outputs carry the
/// weight-`s` factor and inputs the complementary weight `2 − s`, so the
/// pairing between the two weights is preserved.
pub fn pullback_operator(
    psi: &DiffeoField,
    source: &NodeGrid,
    s2: &KernelMatrix,
) -> Result<KernelMatrix, ScatteringError> {
    let n = source.len();
    if s2.n != n {
        return Err(ScatteringError::NodeMismatch(format!("{} source nodes, {} image nodes", n, s2.n)));
    }
    let jac = source.jacobian_dets(psi)?;
    for (k, x) in source.nodes.iter().enumerate() {
        let px = psi.apply(*x)?;
        let tol = 1e-10 * (1.0 + px.norm());
        if (px - s2.nodes[k]).norm() > tol {
            return Err(ScatteringError::NodeMismatch(format!(
                "node {k}: ψ({x}) = {px} but image grid has {}",
                s2.nodes[k]
            )));
        }
        let w = source.weights[k] * jac[k];
        if (w - s2.weights[k]).abs() > 1e-10 * w {
            return Err(ScatteringError::NodeMismatch(format!(
                "node {k}: weight {} is not w·det Dψ = {w}",
                s2.weights[k]
            )));
        }
    }
    let s = s2.s;
    let out: Vec<Complex64> = jac.iter().map(|j| pow_real_complex(*j, s / 2.0)).collect();
    let inp: Vec<Complex64> = jac.iter().map(|j| pow_real_complex(*j, (s - 2.0) / 2.0)).collect();
    let data: Vec<Complex64> = s2
        .data
        .par_chunks(n)
        .enumerate()
        .flat_map_iter(|(i, row)| {
            let oi = out[i];
            row.iter().zip(&inp).map(move |(m, ij)| oi * m * ij)
        })
        .collect();
    KernelMatrix::new(s, source.nodes.clone(), source.weights.clone(), data, Provenance::Pullback, s2.truncation)
}

/// `S₁ − ψ*S₂` entrywise.
pub fn relative_operator(s1: &KernelMatrix, pulled: &KernelMatrix) -> Result<KernelMatrix, ScatteringError> {
    if s1.n != pulled.n || s1.nodes != pulled.nodes || s1.weights != pulled.weights {
        return Err(ScatteringError::NodeMismatch("operators live on different grids".into()));
    }
    if s1.s != pulled.s {
        return Err(ScatteringError::NodeMismatch(format!("s = {} vs {}", s1.s, pulled.s)));
    }
    let data = s1.data.iter().zip(&pulled.data).map(|(a, b)| a - b).collect();
    KernelMatrix::new(s1.s, s1.nodes.clone(), s1.weights.clone(), data, Provenance::Relative, s1.truncation)
}

/// Largest singular value estimate with its bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    /// `‖N v‖` for the final unit iterate.
    pub lower: f64,
    /// Frobenius norm of the weight-symmetrized matrix.
    pub upper: f64,
    pub iterations: usize,
}

pub const NORM_REL_TOL: f64 = 1e-8;
pub const NORM_MAX_ITER: usize = 10_000;

/// Operator norm on `L²(w)`: the top singular value of
/// `N = W^{1/2} M W^{−1/2}`, by power iteration on `N*N` from the all-ones
/// vector until the estimate changes by less than `1e−8` relative.
pub fn operator_norm(m: &KernelMatrix) -> Result<NormEstimate, ScatteringError> {
    let n = m.n;
    let sq: Vec<f64> = m.weights.iter().map(|w| w.sqrt()).collect();
    let sym: Vec<Complex64> = m
        .data
        .par_chunks(n)
        .enumerate()
        .flat_map_iter(|(i, row)| {
            let si = sq[i];
            row.iter().zip(&sq).map(move |(z, sj)| z * (si / sj))
        })
        .collect();
    let upper = sym.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if upper == 0.0 {
        return Ok(NormEstimate { norm: 0.0, lower: 0.0, upper: 0.0, iterations: 0 });
    }
    if !upper.is_finite() {
        return Err(ScatteringError::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut adj = vec![Complex64::new(0.0, 0.0); n * n];
    adj.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = sym[i * n + j].conj();
        }
    });
    let matvec = |a: &[Complex64], v: &[Complex64]| -> Vec<Complex64> {
        a.par_chunks(n).map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    };
    let unit = |v: &mut Vec<Complex64>| {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        norm
    };
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    unit(&mut v);
    let mut estimate = 0.0f64;
    for it in 1..=NORM_MAX_ITER {
        let u = matvec(&sym, &v);
        let lower = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut next = matvec(&adj, &u);
        let grown = unit(&mut next);
        if grown == 0.0 || !grown.is_finite() {
            // v is in the kernel; the estimate so far is the best available.
            return Ok(NormEstimate { norm: lower, lower, upper, iterations: it });
        }
        let new_estimate = grown.sqrt();
        v = next;
        if (new_estimate - estimate).abs() <= NORM_REL_TOL * new_estimate {
            return Ok(NormEstimate { norm: new_estimate, lower: lower.max(0.0), upper, iterations: it });
        }
        estimate = new_estimate;
        if it == NORM_MAX_ITER {
            return Err(ScatteringError::NonConvergence { iterations: it, lower, upper });
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kleinian::examples::{rank1, EXAMPLE_RECT};
    use crate::moebius::MoebiusMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn s3() -> SpectralParam {
        SpectralParam::real(3.0)
    }

    fn diag_matrix(d: &[f64], w: &[f64]) -> KernelMatrix {
        let n = d.len();
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = c(d[i], 0.0);
        }
        let nodes = (0..n).map(|i| c(i as f64, 0.0)).collect();
        KernelMatrix::new(c(3.0, 0.0), nodes, w.to_vec(), data, Provenance::Direct, Truncation::default()).unwrap()
    }

    #[test]
    fn norm_of_diagonal() {
        let est = operator_norm(&diag_matrix(&[3.0, 1.0], &[1.0, 1.0])).unwrap();
        assert!((est.norm - 3.0).abs() < 1e-7, "{est:?}");
        // weights do not change the norm of a diagonal operator
        let est = operator_norm(&diag_matrix(&[3.0, 1.0], &[0.2, 5.0])).unwrap();
        assert!((est.norm - 3.0).abs() < 1e-7, "{est:?}");
        let est = operator_norm(&diag_matrix(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(est.norm, 0.0);
    }

    #[test]
    fn norm_matches_two_by_two_singular_value() {
        // [[1, 2], [0, 1]] has top singular value 1 + √2
        let data = vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let m = KernelMatrix::new(
            c(3.0, 0.0),
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![1.0, 1.0],
            data,
            Provenance::Direct,
            Truncation::default(),
        )
        .unwrap();
        let est = operator_norm(&m).unwrap();
        assert!((est.norm - (1.0 + 2f64.sqrt())).abs() < 1e-7, "{est:?}");
        assert!(est.lower <= est.norm * (1.0 + 1e-12) && est.norm <= est.upper);
    }

    #[test]
    fn trivial_group_two_nodes_closed_form() {
        let g = SchottkyGroup::trivial(None);
        let l = [[0.1, 0.0], [0.0, 0.1]];
        let grid = NodeGrid::from_parts(vec![c(0.0, 0.0), c(0.3, 0.4)], vec![0.01, 0.02], vec![l, l]).unwrap();
        let m = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        let k = 1.0 / 0.25f64.powi(3);
        assert!((m.get(0, 1) - c(k * 0.02, 0.0)).norm() < 1e-12 * k);
        assert!((m.get(1, 0) - c(k * 0.01, 0.0)).norm() < 1e-12 * k);
        let fp = finite_part_integral(&l, c(3.0, 0.0));
        assert!((m.get(0, 0) - fp).norm() < 1e-12 * fp.norm());
        assert!((m.get(0, 1) / 0.02 - m.get(1, 0) / 0.01).norm() < 1e-12 * k);
    }

    #[test]
    fn weighted_symmetry_and_duality() {
        let g = rank1();
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 8).unwrap();
        let m = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        for i in 0..m.n {
            for j in 0..m.n {
                let a = m.get(i, j) / m.weights[j];
                let b = m.get(j, i) / m.weights[i];
                assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }
        let adj = m.weighted_adjoint();
        let f: Vec<Complex64> = (0..m.n).map(|k| c((k as f64).sin(), (0.3 * k as f64).cos())).collect();
        let h: Vec<Complex64> = (0..m.n).map(|k| c((0.7 * k as f64).cos(), 0.1 * k as f64)).collect();
        let lhs = grid.inner(&f, &m.apply(&h));
        let rhs = grid.inner(&adj.apply(&f), &h);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn identity_pullback_is_exact() {
        let g = rank1();
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 6).unwrap();
        let psi = DiffeoField::identity();
        let m = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        let image = grid.push_forward(&psi).unwrap();
        let m2 = assemble_operator(&g, &s3(), &image, Truncation::default()).unwrap();
        let p = pullback_operator(&psi, &grid, &m2).unwrap();
        assert_eq!(p.data, m.data);
        let rel = relative_operator(&m, &p).unwrap();
        assert!(operator_norm(&rel).unwrap().norm < 1e-12);
    }

    #[test]
    fn moebius_pullback_matches_source() {
        let g = rank1();
        let h = MoebiusMap::from_reals([1.1, 0.05, 0.2, -0.1, 0.03, 0.02, 0.9, 0.0]).unwrap();
        let psi = DiffeoField::moebius(h);
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 6).unwrap();
        let g2 = g.conjugate(&h).unwrap();
        let m1 = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        let image = grid.push_forward(&psi).unwrap();
        let m2 = assemble_operator(&g2, &s3(), &image, Truncation::default()).unwrap();
        let p = pullback_operator(&psi, &grid, &m2).unwrap();
        let scale = m1.max_abs();
        for (a, b) in m1.data.iter().zip(&p.data) {
            assert!((a - b).norm() < 1e-8 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn pullback_rejects_mismatched_grids() {
        let g = rank1();
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 4).unwrap();
        let m = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        let psi = DiffeoField::radial_stretch(1.2).unwrap();
        assert!(matches!(pullback_operator(&psi, &grid, &m), Err(ScatteringError::NodeMismatch(_))));
    }

    #[test]
    fn binary_export_round_trips() {
        let m = diag_matrix(&[3.0, -1.5], &[1.0, 2.0]);
        let dir = std::env::temp_dir().join(format!("qr-op-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        m.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 4 * 16);
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), 3.0);
        assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), -1.5);
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(m.sidecar()["n"], 2);
    }
}
