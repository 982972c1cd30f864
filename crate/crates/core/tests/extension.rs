//! Extension tensor identities and ruled extensions on the catalog.

use nullitylab::analyzer::{analyze_point, AnalyzerConfig, CaseTag};
use nullitylab::catalog::{self, ImmersionDef};
use nullitylab::extension::*;
use nullitylab::fields::LChoice;
use nullitylab::jets::ChartPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_points(def: &ImmersionDef, count: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![def.center()];
    for _ in 1..count {
        out.push(ChartPoint::new(
            def.domain
                .iter()
                .map(|[a, b]| rng.gen_range(a.max(-3.0)..=b.min(3.0)))
                .collect(),
        ));
    }
    out
}

#[test]
fn cylinder_codazzi_with_projected_l() {
    let def = catalog::by_name("cylinder_parabola_3").unwrap();
    let choice = LChoice::Projected {
        vectors: vec![vec![0.3, -1.0, 0.2, 1.0]],
    };
    for x in sample_points(&def, 5, 1) {
        let ctx = phi_context(&def, &x, &choice, 2, 1e-8).unwrap();
        assert!(ctx.codazzi_residual().unwrap() < CODAZZI_TOL);
        assert!(ctx.bianchi2_residual().unwrap() < BIANCHI2_TOL);
    }
}

#[test]
fn extensions_pass_their_audits() {
    let cfg = AnalyzerConfig::default();
    for name in ["compo_s2xR_bend", "compo_s3xr2_twist", "compo_s3xr2_double"] {
        let def = catalog::by_name(name).unwrap();
        let xs = sample_points(&def, 4, 9);
        let sample = build_ruled_extension(&def, &xs, &ExtensionConfig::default()).unwrap();
        assert_eq!(sample.dropped, 0);
        let reports: Vec<_> = xs
            .iter()
            .map(|x| analyze_point(&def, x, &cfg).unwrap())
            .collect();
        for a in verify_extension_over(&sample, &reports).unwrap() {
            assert!(a.pass, "{name}: {a:?}");
        }
    }
}

#[test]
fn composition_relative_nullity_values() {
    let def = catalog::by_name("compo_s2xR_bend").unwrap();
    let s = build_ruled_extension(&def, &[def.center()], &ExtensionConfig::default()).unwrap();
    assert!(s
        .points
        .iter()
        .all(|p| p.nu_g == 3 && p.max_curvature < 1e-6));
    let def = catalog::by_name("compo_s3xr2_double").unwrap();
    let s = build_ruled_extension(&def, &[def.center()], &ExtensionConfig::default()).unwrap();
    assert_eq!(s.ell(), 2);
    assert!(s.points.iter().all(|p| p.nu_g == 6));
}

#[test]
fn flat_extreme_has_no_extension() {
    let def = catalog::by_name("clifford_torus").unwrap();
    let r = analyze_point(&def, &def.center(), &AnalyzerConfig::default()).unwrap();
    assert_eq!(r.case, CaseTag::FlatExtreme);
    assert!(build_ruled_extension(&def, &[def.center()], &ExtensionConfig::default()).is_err());
}

#[test]
fn ruled_member_is_ruled() {
    let def = catalog::by_name("ruled_planes_k0").unwrap();
    for x in sample_points(&def, 6, 3) {
        for a in ruled_case_check(&def, &x, 1e-8, 5).unwrap() {
            assert!(a.pass, "{:?}: {a:?}", x.coords);
        }
    }
}

#[test]
fn cylinder_rulings_are_straight() {
    let def = catalog::by_name("cylinder_parabola_3").unwrap();
    let audits = ruled_case_check(&def, &def.center(), 1e-8, 5).unwrap();
    let straight = audits
        .iter()
        .find(|a| a.name == "delta_beta_affine_leaves")
        .unwrap();
    assert!(straight.pass);
}

#[test]
fn explicit_radius_is_validated() {
    let def = catalog::by_name("compo_s2xR_bend").unwrap();
    let cfg = ExtensionConfig {
        radius: Some(-1.0),
        ..ExtensionConfig::default()
    };
    assert!(build_ruled_extension(&def, &[def.center()], &cfg).is_err());
}
