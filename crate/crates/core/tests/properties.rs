//! Property tests for the invariants of every module.

use proptest::prelude::*;

use quasirigid::bounds::{dimension_window, f_sigma, invert_bound};
use quasirigid::kleinian::{examples::EXAMPLE_RECT, Circle, SchottkyGroup};
use quasirigid::moebius::{MapClass, MoebiusMap};
use quasirigid::qc::{ata_eigenvalues, det, DiffeoField, SampleGrid};
use quasirigid::scattering::kernel::Variable;
use quasirigid::scattering::{
    assemble_operator, check_automorphy, kernel_value, symbol_b0, NodeGrid, SpectralParam, Truncation,
};
use quasirigid::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn moebius() -> impl Strategy<Value = MoebiusMap> {
    prop::array::uniform8(-2.0..2.0f64).prop_filter_map("singular", |v| MoebiusMap::from_reals(v).ok())
}

/// Conformal maps without a pole near the sample rectangle.
fn tame_moebius() -> impl Strategy<Value = MoebiusMap> {
    moebius().prop_filter("pole near the rectangle", |m| m.pole().is_none_or(|p| p.norm() > 4.0))
}

fn point() -> impl Strategy<Value = Complex64> {
    (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(x, y)| c(x, y))
}

/// Rank-2 groups with radii and centres perturbed around the example.
fn perturbed_rank2() -> impl Strategy<Value = SchottkyGroup> {
    (prop::array::uniform4(0.5..1.2f64), prop::array::uniform8(-0.3..0.3f64), -1.0..1.0f64).prop_map(|(r, d, theta)| {
        let pairs = [
            (Circle::new(c(3.0 + d[0], d[1]), r[0]), Circle::new(c(-3.0 + d[2], d[3]), r[1]), theta),
            (Circle::new(c(d[4], 3.0 + d[5]), r[2]), Circle::new(c(d[6], -3.0 + d[7]), r[3]), -theta),
        ];
        SchottkyGroup::from_circle_pairs(&pairs, Some(EXAMPLE_RECT)).expect("disjoint circles")
    })
}

fn beltrami() -> impl Strategy<Value = Complex64> {
    (0.0..0.6f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn constructors_are_unimodular(m in moebius(), k in beltrami()) {
        prop_assert!((m.det() - 1.0).norm() <= 1e-12);
        let d = MoebiusMap::diagonal(k + 1.0).unwrap();
        prop_assert!((d.det() - 1.0).norm() <= 1e-12);
    }

    #[test]
    fn dilation_is_a_cocycle(f in tame_moebius(), g in tame_moebius(), z in point()) {
        let gz = g.apply_finite(z).unwrap();
        prop_assume!(f.pole().is_none_or(|p| (gz - p).norm() > 1e-3));
        let lhs = f.compose(&g).conformal_dilation(z).unwrap();
        let rhs = f.conformal_dilation(gz).unwrap() * g.conformal_dilation(z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn classification_is_conjugation_invariant(g in moebius(), h in moebius()) {
        let t = g.trace();
        // stay away from the class boundaries tr² ∈ [0, 4]
        let tr2 = t * t;
        prop_assume!(tr2.im.abs() > 1e-3 || (tr2.re - 4.0).abs() > 1e-3 && tr2.re.abs() > 1e-3);
        prop_assert_eq!(g.conjugate_by(&h).classify(), g.classify());
    }

    #[test]
    fn displacement_of_inverse(g in moebius()) {
        prop_assert!((g.base_displacement() - g.inverse().base_displacement()).abs() <= 1e-12);
    }

    #[test]
    fn words_are_distinct_and_ping_pong(g in perturbed_rank2()) {
        let words: Vec<_> = g.enumerate_words(4).collect();
        let circles = g.circles();
        for (i, w) in words.iter().enumerate().skip(1) {
            let z = w.map.apply_finite(c(0.0, 0.0)).unwrap();
            prop_assert!(circles.iter().any(|ci| ci.exterior_distance(z) < 0.0), "{} sends 0 to {}", w, z);
            for v in &words[..i] {
                prop_assert!(!w.map.approx_eq(&v.map, 1e-9), "{} = {}", w, v);
            }
        }
        prop_assert_eq!(words[0].map.classify(), MapClass::Identity);
    }

    #[test]
    fn orbital_count_is_monotone(g in perturbed_rank2(), r in 2.0..6.0f64, dr in 0.0..2.0f64) {
        let a = g.orbital_count(r, 10);
        let b = g.orbital_count(r + dr, 10);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn distortion_is_unimodular(mu in beltrami(), h in tame_moebius(), z in point()) {
        let psi = DiffeoField::composite(vec![
            DiffeoField::linear_beltrami(mu).unwrap(),
            DiffeoField::moebius(h),
        ]).unwrap();
        let a = psi.distortion_matrix(z).unwrap();
        prop_assert!((det(&a) - 1.0).abs() <= 1e-10);
        let (l, inv) = ata_eigenvalues(&a);
        prop_assert!(l >= 1.0 && (l * inv - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn dilatation_routes_agree_and_ignore_conformal_factors(mu in beltrami(), h in tame_moebius()) {
        let grid = SampleGrid::new(EXAMPLE_RECT, 8);
        let bare = DiffeoField::linear_beltrami(mu).unwrap();
        let rep = bare.dilatation(&grid).unwrap();
        prop_assert!((rep.k_from_lambda - rep.k_from_beltrami).abs() < 1e-6);
        // pre-composition keeps the grid away from the pole
        let pre = DiffeoField::composite(vec![DiffeoField::moebius(h), bare.clone()]).unwrap();
        let post = DiffeoField::composite(vec![bare, DiffeoField::moebius(h)]).unwrap();
        for psi in [pre, post] {
            let r = psi.dilatation(&grid).unwrap();
            prop_assert!((r.k_from_lambda - rep.k_from_lambda).abs() < 1e-6);
            prop_assert!((r.k_from_beltrami - rep.k_from_beltrami).abs() < 1e-6);
        }
        let zero = (mu.norm() == 0.0) == ((rep.k_from_lambda - 1.0).abs() < 1e-8);
        prop_assert!(zero || mu.norm() < 1e-8);
    }

    #[test]
    fn symbol_lies_in_range(mu in beltrami(), sigma in -3.0..3.0f64, t in 0.0..std::f64::consts::TAU, z in point()) {
        let psi = DiffeoField::linear_beltrami(mu).unwrap();
        let xi = [t.cos(), t.sin()];
        let b = symbol_b0(&psi, sigma, z, xi).unwrap();
        prop_assert!((0.0..=2.0).contains(&b));
        let a = psi.distortion_matrix(z).unwrap();
        let v = [a[0][0] * xi[0] + a[0][1] * xi[1], a[1][0] * xi[0] + a[1][1] * xi[1]];
        let stretch = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if (stretch - 1.0).abs() <= 1e-12 {
            prop_assert!(b <= 1e-20);
        }
    }

    #[test]
    fn f_sigma_bounds_and_symmetry(sigma in 0.1..3.0f64, l in 1.0..50.0f64) {
        let f = f_sigma(sigma, l).unwrap();
        prop_assert!((0.0..=4.0 * std::f64::consts::PI).contains(&f));
        prop_assert!((f - f_sigma(sigma, 1.0 / l).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn window_is_monotone_in_k(k in 1.0..5.0f64, dk in 0.0..2.0f64, d in 0.0..2.0f64) {
        let a = dimension_window(k, d).unwrap();
        let b = dimension_window(k + dk, d).unwrap();
        prop_assert!(b.lower <= a.lower + 1e-15 && b.upper >= a.upper - 1e-15);
        prop_assert!(a.lower <= d + 1e-15 && d <= a.upper + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inversion_round_trips(sigma in 0.5..2.0f64, log_delta in -4.0..0.0f64) {
        let delta = 10f64.powf(log_delta);
        let target = f_sigma(sigma, 1.0 + delta).unwrap();
        let eps = (target / (2.0 * sigma * sigma)).sqrt();
        let inv = invert_bound(sigma, eps).unwrap();
        prop_assert!((inv.delta - delta).abs() <= 1e-8, "{} vs {}", inv.delta, delta);
    }

    #[test]
    fn kernel_is_automorphic(g in perturbed_rank2(), x in point(), y in point(), k in 0usize..4, im in -1.0..1.0f64) {
        prop_assume!((x - y).norm() > 1e-2);
        let gamma = g.enumerate_words(2).nth(1 + k).unwrap();
        let s = SpectralParam::new(c(3.0, im));
        for var in [Variable::X, Variable::Y] {
            let r = check_automorphy(&g, &s, x, y, &gamma, 5, var).unwrap();
            prop_assert!(r.residual <= 1e-10 * r.direct.norm(), "{:?}", r);
        }
    }

    #[test]
    fn kernel_is_symmetric(g in perturbed_rank2(), x in point(), y in point()) {
        prop_assume!((x - y).norm() > 1e-2);
        let s = SpectralParam::real(3.0);
        let a = kernel_value(&g, &s, x, y, Truncation::new(10)).unwrap();
        let b = kernel_value(&g, &s, y, x, Truncation::new(10)).unwrap();
        prop_assert!((a.value - b.value).norm() <= 1e-12 * a.value.norm() + a.tail_bound + b.tail_bound);
    }

    #[test]
    fn weighted_adjoint_is_dual(g in perturbed_rank2(), f in prop::collection::vec(-1.0..1.0f64, 72), im in -1.0..1.0f64) {
        let grid = NodeGrid::tensor(&g, EXAMPLE_RECT, 6).unwrap();
        let m = assemble_operator(&g, &SpectralParam::new(c(3.0, im)), &grid, Truncation::new(8)).unwrap();
        let n = m.n;
        let u: Vec<Complex64> = (0..n).map(|k| c(f[k % 72], f[(k + 7) % 72])).collect();
        let v: Vec<Complex64> = (0..n).map(|k| c(f[(k + 31) % 72], -f[(k + 3) % 72])).collect();
        let lhs = grid.inner(&u, &m.apply(&v));
        let rhs = grid.inner(&m.weighted_adjoint().apply(&u), &v);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0), "{} vs {}", lhs, rhs);
    }
}
