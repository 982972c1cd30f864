//! Property tests of the linear-algebra and pointwise-geometry invariants.

use nalgebra::{DMatrix, DVector};
use nullitylab::analyzer::{analyze_point, AnalyzerConfig};
use nullitylab::bilinear::{
    diagonal_defect, find_regular_element, flatness_residual, moore_diagonalize, moore_nullity,
    nullity_brute_force, rho_orthonormality, BilinearForm,
};
use nullitylab::catalog::list_catalog;
use nullitylab::geometry::{nullity_gamma, point_geometry, relative_nullity};
use nullitylab::jets::{lift, ChartPoint};
use nullitylab::linalg::{kernel_subspace, random_orthogonal, Subspace};
use nullitylab::taylor::{MonomialBasis, Taylor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `beta(x, y) = sum_i a_i(x) b_i(y) rho_i` with orthonormal `rho_i`: flat.
fn flat_form(
    left: usize,
    right: usize,
    target: usize,
    terms: usize,
    rng: &mut ChaCha8Rng,
) -> BilinearForm {
    let rho = random_orthogonal(target, rng);
    let a = gaussian(terms, left, rng);
    let b = gaussian(terms, right, rng);
    BilinearForm::from_fn(left, right, target, |i, j| {
        let mut v = DVector::zeros(target);
        for t in 0..terms {
            v += rho.column(t) * (a[(t, i)] * b[(t, j)]);
        }
        v
    })
}

fn random_form(left: usize, right: usize, target: usize, rng: &mut ChaCha8Rng) -> BilinearForm {
    BilinearForm::from_fn(left, right, target, |_, _| {
        DVector::from_fn(target, |_, _| rng.sample::<f64, _>(StandardNormal))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatness_is_invariant_under_target_rotations(seed in any::<u64>(), l in 1usize..4, r in 1usize..4, t in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_form(l, r, t, &mut rng);
        let q = random_orthogonal(t, &mut rng);
        let rotated = b.transform(&DMatrix::identity(l, l), &DMatrix::identity(r, r), &q);
        prop_assert!((flatness_residual(&b) - flatness_residual(&rotated)).abs() < 1e-10);
    }

    #[test]
    fn flat_forms_stay_flat_under_all_rotations(seed in any::<u64>(), l in 1usize..5, r in 1usize..5, t in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = rng.gen_range(1..=t);
        let b = flat_form(l, r, t, terms, &mut rng);
        let rot = b.transform(
            &random_orthogonal(l, &mut rng),
            &random_orthogonal(r, &mut rng),
            &random_orthogonal(t, &mut rng),
        );
        prop_assert!(flatness_residual(&b) < 1e-12);
        prop_assert!(flatness_residual(&rot) < 1e-12);
    }

    #[test]
    fn moore_nullity_matches_brute_force(seed in any::<u64>(), l in 1usize..6, r in 1usize..5, t in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = rng.gen_range(1..=t.min(l));
        let b = flat_form(l, r, t, terms, &mut rng);
        let reg = find_regular_element(&b, 16, seed);
        let moore = moore_nullity(&b, &reg, 1e-8).unwrap();
        let brute = nullity_brute_force(&b, 1e-8);
        prop_assert!(moore.distance(&brute) < 1e-8);
        prop_assert!(moore.dim() + t >= l);
    }

    #[test]
    fn non_flat_forms_are_rejected(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_form(3, 3, 3, &mut rng);
        let reg = find_regular_element(&b, 8, seed);
        prop_assert!(moore_nullity(&b, &reg, 1e-8).is_err());
    }

    #[test]
    fn symmetric_flat_forms_diagonalize(seed in any::<u64>(), n in 1usize..5, extra in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = (n + extra).min(4);
        let q = random_orthogonal(n, &mut rng);
        let rho = random_orthogonal(t, &mut rng);
        let k = n.min(t);
        let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
        let b = BilinearForm::from_fn(n, n, t, |i, j| {
            let mut v = DVector::zeros(t);
            for s in 0..k {
                v += rho.column(s) * (scales[s] * q[(i, s)] * q[(j, s)]);
            }
            v
        });
        let nullity = nullity_brute_force(&b, 1e-8);
        let pairs = moore_diagonalize(&b, &nullity).unwrap();
        prop_assert_eq!(pairs.len() + nullity.dim(), n);
        prop_assert!(diagonal_defect(&b, &pairs) < 1e-8);
        prop_assert!(rho_orthonormality(&pairs) < 1e-8);
    }

    #[test]
    fn kernels_are_kernels(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, rank in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = rank.min(rows).min(cols);
        let m = gaussian(rows, rank, &mut rng) * gaussian(rank, cols, &mut rng);
        let k = kernel_subspace(&m, 1e-8);
        prop_assert_eq!(k.dim(), cols - rank);
        let p = k.projector();
        prop_assert!((&p * &p - &p).amax() < 1e-12);
        prop_assert!((&m * &p).amax() < 1e-10 * m.amax().max(1.0));
    }

    #[test]
    fn subspace_intersection_is_contained(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Subspace::span(&gaussian(n, rng.gen_range(1..=n), &mut rng), 1e-8);
        let b = Subspace::span(&gaussian(n, rng.gen_range(1..=n), &mut rng), 1e-8);
        let i = a.intersection(&b);
        prop_assert!(a.containment_residual(&i) < 1e-10);
        prop_assert!(b.containment_residual(&i) < 1e-10);
        prop_assert_eq!(i.dim() + n.min(a.dim() + b.dim()), a.dim() + b.dim());
    }

    #[test]
    fn taylor_identities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = MonomialBasis::get(2, 3);
        let x = Taylor::variable(&basis, 0, rng.gen_range(-0.5..1.0));
        let y = Taylor::variable(&basis, 1, rng.gen_range(0.5..2.0));
        let f = &(&x * &y) + &y;
        let one = &f * &f.recip();
        let trig = &(&x.sin() * &x.sin()) + &(&x.cos() * &x.cos());
        for k in 0..basis.len() {
            let target = if k == 0 { 1.0 } else { 0.0 };
            prop_assert!((one.coeffs()[k] - target).abs() < 1e-10);
            prop_assert!((trig.coeffs()[k] - target).abs() < 1e-12);
        }
        let h = [0.01, -0.02];
        let exact = (x.value() + h[0]) * (y.value() + h[1]) + y.value() + h[1];
        prop_assert!((f.eval_offset(&h) - exact).abs() < 1e-14);
    }
}

#[test]
fn pointwise_invariants_over_the_catalog() {
    let cfg = AnalyzerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for def in list_catalog() {
        for _ in 0..10 {
            let x = ChartPoint::new(
                def.domain
                    .iter()
                    .map(|[a, b]| rng.gen_range(a.max(-3.0)..=b.min(3.0)))
                    .collect(),
            );
            let pg = point_geometry(&lift(&def, &x, 2).unwrap()).unwrap();
            assert!(pg.curvature_symmetry_residual() < 1e-10, "{}", def.name);
            let gamma = nullity_gamma(&pg, 1e-8);
            let delta = relative_nullity(&pg, 1e-8);
            assert!(gamma.containment_residual(&delta) < 1e-8, "{}", def.name);
            let r = analyze_point(&def, &x, &cfg).unwrap();
            assert!(r.nu_g <= r.mu && r.mu <= r.nu_g + r.p, "{}", def.name);

            // the classification does not depend on the tangent frame
            let q = random_orthogonal(def.n, &mut rng);
            let rotated = pg.rotate_tangent(&q);
            assert_eq!(nullity_gamma(&rotated, 1e-8).dim(), gamma.dim());
            assert_eq!(relative_nullity(&rotated, 1e-8).dim(), delta.dim());
            let rr = nullitylab::analyzer::analyze_geometry(&rotated, &x, &cfg).unwrap();
            assert_eq!(rr.signature(), r.signature(), "{}", def.name);
        }
    }
}
