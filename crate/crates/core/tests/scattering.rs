//! End-to-end checks of the scattering pipeline on the example groups.

use quasirigid::kleinian::examples::{rank1, rank2, EXAMPLE_RECT};
use quasirigid::moebius::MoebiusMap;
use quasirigid::qc::DiffeoField;
use quasirigid::scattering::{
    assemble_operator, assemble_remainder, operator_norm, probe_pairing, pullback_operator, relative_operator,
    NodeGrid, ProbeQuadrature, SpectralParam, Truncation,
};
use quasirigid::Complex64;

fn s3() -> SpectralParam {
    SpectralParam::real(3.0)
}

fn norm_on(n: usize, remainder: bool) -> f64 {
    let g = rank1();
    let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, n).unwrap();
    let m = if remainder {
        assemble_remainder(&g, &s3(), &grid, Truncation::default()).unwrap()
    } else {
        assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap()
    };
    operator_norm(&m).unwrap().norm
}

/// The full operator has a hypersingular kernel (order `2 Re s − 2 = 4`),
/// so its discrete norm grows like `h^{-4}` under refinement.
#[test]
fn full_operator_norm_is_stable_under_refinement() {
    let (coarse, fine) = (norm_on(16, false), norm_on(32, false));
    let change = (fine - coarse).abs() / coarse;
    assert!(change < 0.05, "‖M‖: {coarse:.6e} (16²) → {fine:.6e} (32²), change {:.1}%", 100.0 * change);
}

/// The smooth part of the kernel is a bounded operator; its discrete norm
/// converges at the midpoint rate `O(h²)` (about 14% from 16² to 32², since
/// the kernel is steep next to the disks).
#[test]
fn remainder_operator_norm_is_stable_under_refinement() {
    let (coarse, fine) = (norm_on(32, true), norm_on(48, true));
    let change = (fine - coarse).abs() / coarse;
    assert!(change < 0.05, "{coarse:.6e} → {fine:.6e}, change {:.2}%", 100.0 * change);
}

#[test]
fn isometric_pullback_is_pure_composition() {
    // z ↦ e^{iθ} z + b has |ψ'| = 1, so det Dψ ≡ 1.
    let theta: f64 = 0.3;
    let a = Complex64::from_polar(1.0, 0.5 * theta);
    let h = MoebiusMap::new(a, Complex64::new(0.1, -0.05) / a.conj(), Complex64::new(0.0, 0.0), a.conj()).unwrap();
    let psi = DiffeoField::moebius(h);
    let g = rank1();
    let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 8).unwrap();
    let image = grid.push_forward(&psi).unwrap();
    let g2 = g.conjugate(&h).unwrap();
    let s2 = assemble_operator(&g2, &s3(), &image, Truncation::default()).unwrap();
    let p = pullback_operator(&psi, &grid, &s2).unwrap();
    for (x, y) in p.data.iter().zip(&s2.data) {
        assert!((x - y).norm() <= 1e-13 * y.norm());
    }
}

#[test]
fn moebius_rigidity_on_both_examples() {
    let h = MoebiusMap::from_reals([0.95, -0.1, 0.1, 0.2, -0.04, 0.01, 1.05, 0.0]).unwrap();
    let psi = DiffeoField::moebius(h);
    for g in [rank1(), rank2()] {
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 12).unwrap();
        let s1 = assemble_operator(&g, &s3(), &grid, Truncation::default()).unwrap();
        let image = grid.push_forward(&psi).unwrap();
        let s2 = assemble_operator(&g.conjugate(&h).unwrap(), &s3(), &image, Truncation::default()).unwrap();
        let rel = relative_operator(&s1, &pullback_operator(&psi, &grid, &s2).unwrap()).unwrap();
        let scale = s1.max_abs();
        assert!(rel.max_abs() <= 1e-8 * scale);
        let est = operator_norm(&rel).unwrap();
        assert!(est.norm < 1e-6, "{est:?}");
    }
}

#[test]
fn probe_pairing_grows_with_distortion() {
    let g = rank1();
    let q = ProbeQuadrature::default();
    let values: Vec<f64> = [0.0, 0.1, 0.2, 0.3]
        .iter()
        .map(|m| {
            let psi = DiffeoField::linear_beltrami(Complex64::new(*m, 0.0)).unwrap();
            probe_pairing(&g, &psi, 1.0, 0.4, &q).unwrap()
        })
        .collect();
    assert!(values[0].abs() < 1e-12);
    assert!(values.windows(2).all(|w| w[0] < w[1]), "{values:?}");
}
