//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use nullitylab::analyzer::{
    analyze_point, build_beta, dimension_identity_audit, AnalyzerConfig, CaseTag, Grid,
};
use nullitylab::bilinear::{
    diagonal_defect, find_regular_element, moore_diagonalize, moore_nullity, nullity_brute_force,
    rho_orthonormality, span_of, BilinearForm,
};
use nullitylab::catalog::{by_name, list_catalog, ImmersionDef};
use nullitylab::extension::{
    bianchi1_residual, build_ruled_extension, curvature_of_phi, phi_context, ruled_case_check,
    verify_extension_over, ExtensionConfig,
};
use nullitylab::fields::{FieldGeometry, LChoice};
use nullitylab::geometry::{nullity_gamma, point_geometry};
use nullitylab::jets::{lift, ChartPoint};
use nullitylab::linalg::{random_orthogonal, Subspace};
use nullitylab::series::MatSeries;
use nullitylab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CK_POINTS_PER_MEMBER: usize = 50;
const CK_TIME: Duration = Duration::from_secs(30);
const PHI_TIME: Duration = Duration::from_secs(120);
const FLAT_R_TOL: f64 = 1e-8;
const SUBSPACE_TOL: f64 = 1e-8;
const DIAG_TOL: f64 = 1e-8;
const CODAZZI_TOL: f64 = 1e-8;
const BIANCHI1_TOL: f64 = 1e-10;
const BIANCHI2_TOL: f64 = 1e-7;
const R_PHI_TOL: f64 = 1e-8;
const R_N_TOL: f64 = 1e-6;
const EXT_SUBSPACE_TOL: f64 = 1e-6;
const RULED_TOL: f64 = 1e-6;

type Outcome = Result<String, String>;

fn random_points(def: &ImmersionDef, count: usize, rng: &mut ChaCha8Rng) -> Vec<ChartPoint> {
    (0..count)
        .map(|_| {
            ChartPoint::new(
                def.domain
                    .iter()
                    .map(|&[lo, hi]| {
                        let (lo, hi) = (lo.max(-3.0), hi.min(3.0));
                        if hi > lo {
                            rng.gen_range(lo..=hi)
                        } else {
                            lo
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Grid on the box shrunk by 10% per side: 3 samples per axis up to n = 3,
/// 2 above.
fn interior_grid(def: &ImmersionDef) -> Vec<ChartPoint> {
    let per_axis = if def.n <= 3 { 3 } else { 2 };
    let shrunk: Vec<[f64; 2]> = def
        .domain
        .iter()
        .map(|&[lo, hi]| {
            let (lo, hi) = (lo.max(-3.0), hi.min(3.0));
            let pad = 0.1 * (hi - lo);
            [lo + pad, hi - pad]
        })
        .collect();
    let grid = Grid::new(vec![per_axis; def.n], shrunk).unwrap();
    (0..grid.len()).map(|i| grid.point(i)).collect()
}

fn crit1_2() -> (Outcome, Outcome) {
    let cfg = AnalyzerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut points, mut ck_bad, mut id_bad, mut bound_checked, mut bound_bad) = (0, 0, 0, 0, 0);
    let mut errors = Vec::new();
    for def in list_catalog() {
        for x in random_points(&def, CK_POINTS_PER_MEMBER, &mut rng) {
            let r = match analyze_point(&def, &x, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    errors.push(format!("{}: {e}", def.name));
                    continue;
                }
            };
            points += 1;
            if !(r.nu_g <= r.mu && r.mu <= r.nu_g + r.p) {
                ck_bad += 1;
            }
            if r.nu_g + r.dim_delta_beta_plus_gamma != r.dim_delta_beta + r.mu {
                id_bad += 1;
            }
            if r.nu_g + r.p + 1 <= r.n {
                bound_checked += 1;
                if !(r.mu - r.nu_g <= r.dim_s_beta && r.dim_s_beta + 1 <= r.p) {
                    bound_bad += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let c1 = if ck_bad == 0 && errors.is_empty() && points >= 500 && elapsed < CK_TIME {
        Ok(format!(
            "{points} points, 0 violations, {:.1}s",
            elapsed.as_secs_f64()
        ))
    } else {
        Err(format!(
            "{points} points, {ck_bad} violations, {} errors {:?}, {:.1}s",
            errors.len(),
            errors.first(),
            elapsed.as_secs_f64()
        ))
    };
    let detail = format!(
        "{points} points, identity failures {id_bad}; bounds checked at {bound_checked}, failures {bound_bad}"
    );
    let c2 = if id_bad == 0 && bound_bad == 0 && errors.is_empty() && bound_checked > 0 {
        Ok(detail)
    } else {
        Err(detail)
    };
    (c1, c2)
}

fn crit3() -> Outcome {
    let def = by_name("clifford_torus").unwrap();
    let grid = Grid::new(vec![9, 9], def.domain.clone()).unwrap();
    let cfg = AnalyzerConfig::default();
    let mut worst_r: f64 = 0.0;
    let mut count = 0;
    for i in 0..grid.len() {
        let m = grid.multi_index(i);
        if m.iter().any(|&c| c == 0 || c == 8) {
            continue;
        }
        let x = grid.point(i);
        let r = analyze_point(&def, &x, &cfg).map_err(|e| e.to_string())?;
        let pg = point_geometry(&lift(&def, &x, 2).unwrap()).unwrap();
        worst_r = worst_r.max(pg.max_curvature());
        if r.case != CaseTag::FlatExtreme || r.mu != 2 || r.n != 2 || r.nu_g != 0 {
            return Err(format!(
                "point {:?}: {} mu {} nu {}",
                x.coords, r.case, r.mu, r.nu_g
            ));
        }
        count += 1;
    }
    let detail = format!("{count} interior points FlatExtreme, max |R| {worst_r:.2e}");
    if worst_r < FLAT_R_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn crit4() -> Outcome {
    let cfg = AnalyzerConfig::default();
    let (mut worst, mut checks) = (0.0f64, 0);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for def in list_catalog() {
            for x in random_points(&def, 3, &mut rng) {
                let pg = point_geometry(&lift(&def, &x, 2).unwrap()).unwrap();
                let gamma = nullity_gamma(&pg, cfg.tol_rank);
                let beta = build_beta(&pg, &gamma).map_err(|e| e.to_string())?;
                let reg = find_regular_element(&beta, cfg.trials, seed);
                let m = moore_nullity(&beta, &reg, cfg.tol_flat)
                    .map_err(|e| format!("{}: {e}", def.name))?;
                let brute = nullity_brute_force(&beta, cfg.tol_rank);
                worst = worst.max(m.distance(&brute));
                if m.dim() + span_of(&beta).dim() < def.n {
                    return Err(format!("{}: dim bound fails", def.name));
                }
                checks += 1;
            }
        }
    }
    let detail = format!("{checks} forms over 10 seeds, max distance {worst:.2e}");
    if worst < SUBSPACE_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synthetic_flat_symmetric(rng: &mut ChaCha8Rng) -> BilinearForm {
    let n = rng.gen_range(1..=5usize);
    let t = rng.gen_range(1..=4usize);
    let q = random_orthogonal(n, rng);
    let rho = random_orthogonal(t, rng);
    let k = n.min(t);
    let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
    BilinearForm::from_fn(n, n, t, |i, j| {
        let mut v = DVector::zeros(t);
        for s in 0..k {
            v += rho.column(s) * (scales[s] * q[(i, s)] * q[(j, s)]);
        }
        v
    })
}

fn crit5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut forms: Vec<(String, BilinearForm)> = (0..50)
        .map(|i| (format!("synthetic {i}"), synthetic_flat_symmetric(&mut rng)))
        .collect();
    let mut catalog_forms = 0;
    for def in list_catalog() {
        for x in random_points(&def, 3, &mut rng) {
            let pg = point_geometry(&lift(&def, &x, 2).unwrap()).unwrap();
            let gamma = nullity_gamma(&pg, 1e-8);
            let mu = gamma.dim();
            if mu == 0 {
                continue;
            }
            forms.push((
                def.name.clone(),
                BilinearForm::from_fn(mu, mu, pg.p, |i, j| {
                    pg.alpha_on(
                        &gamma.basis.column(i).into_owned(),
                        &gamma.basis.column(j).into_owned(),
                    )
                }),
            ));
            catalog_forms += 1;
        }
    }
    let (mut off, mut orth) = (0.0f64, 0.0f64);
    for (name, b) in &forms {
        let nullity = nullity_brute_force(b, 1e-8);
        let pairs = moore_diagonalize(b, &nullity).map_err(|e| format!("{name}: {e}"))?;
        if pairs.len() + nullity.dim() != b.dim_left {
            return Err(format!(
                "{name}: {} pairs for rank {}",
                pairs.len(),
                b.dim_left - nullity.dim()
            ));
        }
        off = off.max(diagonal_defect(b, &pairs) / b.max_norm().max(1.0));
        orth = orth.max(rho_orthonormality(&pairs));
    }
    let detail = format!(
        "50 synthetic + {catalog_forms} catalog forms, off-diagonal {off:.2e}, rho orthonormality {orth:.2e}"
    );
    if off < DIAG_TOL && orth < DIAG_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn l_choices(def: &ImmersionDef) -> Vec<LChoice> {
    let v: Vec<f64> = (0..def.n + def.p)
        .map(|i| 1.0 + 0.37 * i as f64 - 0.1 * (i * i) as f64)
        .collect();
    vec![
        LChoice::ComplementOfBetaSpan,
        LChoice::FullNormal,
        LChoice::Projected { vectors: vec![v] },
    ]
}

fn crit6() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    let mut checks = 0;
    for def in list_catalog() {
        for x in interior_grid(&def) {
            for choice in l_choices(&def) {
                let ctx = match phi_context(&def, &x, &choice, 2, 1e-8) {
                    Ok(c) => c,
                    // not a valid L here: rank zero
                    Err(Error::InvalidParameter(_)) => continue,
                    Err(e) => return Err(format!("{} {:?}: {e}", def.name, x.coords)),
                };
                let r = curvature_of_phi(&ctx.tensor);
                let vals = [
                    ctx.codazzi_residual().map_err(|e| e.to_string())?,
                    bianchi1_residual(&r),
                    ctx.bianchi2_residual().map_err(|e| e.to_string())?,
                ];
                for (w, v) in worst.iter_mut().zip(vals) {
                    *w = w.max(v);
                }
                checks += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{checks} (point, L) pairs, Codazzi {:.2e}, Bianchi {:.2e} / {:.2e}, {:.1}s",
        worst[0],
        worst[1],
        worst[2],
        elapsed.as_secs_f64()
    );
    if worst[0] < CODAZZI_TOL
        && worst[1] < BIANCHI1_TOL
        && worst[2] < BIANCHI2_TOL
        && elapsed < PHI_TIME
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn extension_over_grid(name: &str) -> Result<(ImmersionDef, Vec<ChartPoint>), String> {
    let def = by_name(name).map_err(|e| e.to_string())?;
    let xs = interior_grid(&def);
    Ok((def, xs))
}

fn crit7() -> Outcome {
    let (def, xs) = extension_over_grid("compo_s2xR_bend")?;
    let cfg = AnalyzerConfig::default();
    let reports: Vec<_> = xs
        .iter()
        .map(|x| analyze_point(&def, x, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let s =
        build_ruled_extension(&def, &xs, &ExtensionConfig::default()).map_err(|e| e.to_string())?;
    let (n, p, ell) = (def.n, def.p, s.ell());
    let target = (n + ell) - (p - ell);
    let r_phi = s.bases.iter().map(|b| b.max_r_phi).fold(0.0, f64::max);
    let r_n = s.points.iter().map(|q| q.max_curvature).fold(0.0, f64::max);
    let dist = s
        .bases
        .iter()
        .map(|b| b.delta_ghat_vs_gamma)
        .fold(0.0, f64::max);
    let nus: std::collections::BTreeSet<usize> = s.points.iter().map(|q| q.nu_g).collect();
    let audits = verify_extension_over(&s, &reports).map_err(|e| e.to_string())?;
    let failed: Vec<_> = audits
        .iter()
        .filter(|a| !a.pass)
        .map(|a| a.name.clone())
        .collect();
    let detail = format!(
        "{} bases, {} samples: R_phi {r_phi:.2e}, R_N {r_n:.2e}, nu_G {nus:?} (formula {target}), dist(Delta_ghat, Gamma) {dist:.2e}",
        s.bases.len(),
        s.points.len()
    );
    if r_phi < R_PHI_TOL
        && r_n < R_N_TOL
        && nus.len() == 1
        && nus.contains(&target)
        && dist < EXT_SUBSPACE_TOL
        && failed.is_empty()
    {
        Ok(detail)
    } else {
        Err(format!("{detail}; failed audits {failed:?}"))
    }
}

fn crit8() -> Outcome {
    let def = by_name("compo_s3xr2_twist").map_err(|e| e.to_string())?;
    let cfg = AnalyzerConfig::default();
    let annotated = def
        .expected
        .as_ref()
        .and_then(|e| e.case)
        .ok_or("no annotation")?;
    let grid = Grid::new(vec![3; def.n], def.domain.clone()).unwrap();
    let mut classified = 0;
    for i in 0..grid.len() {
        let r = analyze_point(&def, &grid.point(i), &cfg).map_err(|e| e.to_string())?;
        if r.case != annotated {
            continue;
        }
        classified += 1;
        if !(1..=2).contains(&r.ell) {
            return Err(format!("ell = {} at {:?}", r.ell, r.x.coords));
        }
    }
    let xs = interior_grid(&def);
    let reports: Vec<_> = xs
        .iter()
        .map(|x| analyze_point(&def, x, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let k1 = reports
        .iter()
        .filter(|r| r.case == CaseTag::RankOneLK1)
        .count();
    let s =
        build_ruled_extension(&def, &xs, &ExtensionConfig::default()).map_err(|e| e.to_string())?;
    let mut bound_bad = 0;
    for q in &s.points {
        let r = &reports[q.base];
        if r.case == CaseTag::RankOneLK1 && q.mu_n < r.mu - r.nu_g + q.nu_g {
            bound_bad += 1;
        }
    }
    let r_n = s.points.iter().map(|q| q.max_curvature).fold(0.0, f64::max);
    let dims: std::collections::BTreeSet<usize> = s.points.iter().map(|q| q.mu_n).collect();
    let detail = format!(
        "ell in {{1,2}} at {classified}/{} grid points; k = 1 route at {k1} bases, dim Gamma_hat {dims:?}, bound failures {bound_bad}, R_N {r_n:.2e}",
        grid.len()
    );
    if classified > 0 && k1 > 0 && bound_bad == 0 && r_n < R_N_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn crit9() -> Outcome {
    let def = by_name("ruled_planes_k0").map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut min_dim = usize::MAX;
    let xs = interior_grid(&def);
    for (i, x) in xs.iter().enumerate() {
        let audits = ruled_case_check(&def, x, 1e-8, i as u64).map_err(|e| e.to_string())?;
        for a in &audits {
            if a.name != "delta_beta_rank" && a.name != "corrupted_distribution_rejected" {
                worst = worst.max(a.value);
            }
        }
        let fg = FieldGeometry::new(&def, x, 2, 1e-8).map_err(|e| e.to_string())?;
        min_dim = min_dim.min(fg.delta_beta_projector(1e-8).1);
    }
    let need = def.n + 1 - def.p;
    let detail = format!(
        "{} points, worst residual {worst:.2e}, min dim Delta_beta {min_dim} (need {need})",
        xs.len()
    );
    if worst < RULED_TOL && min_dim >= need {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exit_of(args: &[&str]) -> (Option<i32>, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_nullitylab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        o.status.code(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn crit10() -> Outcome {
    let mut notes = Vec::new();

    // corrupted report
    let def = by_name("sphere_2").unwrap();
    let mut r = analyze_point(&def, &def.center(), &AnalyzerConfig::default()).unwrap();
    r.mu = r.nu_g + r.p + 1;
    let ck = dimension_identity_audit(&r)
        .into_iter()
        .find(|a| a.name == "chern_kuiper")
        .unwrap();
    if ck.pass {
        return Err("corrupted report passes the Chern-Kuiper audit".into());
    }
    notes.push("corrupted report rejected");

    // <b00, b11> - <b01, b10> = 4 - 6
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let b = BilinearForm::from_fn(2, 2, 2, |i, j| {
        let mut v = DVector::zeros(2);
        v[(i + j) % 2] = 1.0 + (i * 2 + j) as f64;
        v
    });
    let reg = find_regular_element(&b, 16, rng.gen());
    match moore_nullity(&b, &reg, 1e-8) {
        Err(Error::NonFlat { .. }) => notes.push("non-flat form rejected"),
        other => return Err(format!("non-flat form accepted: {other:?}")),
    }

    // corrupted Delta_beta field
    let def = by_name("ruled_planes_k0").unwrap();
    let x = def.center();
    let fg = FieldGeometry::new(&def, &x, 2, 1e-8).unwrap();
    let (q, dim) = fg.delta_beta_projector(1e-8);
    let rot = random_orthogonal(def.n, &mut rng);
    let wrong = Subspace::span(&rot.columns(0, dim).into_owned(), 1e-8).projector();
    let corrupted = MatSeries::constant(q.basis(), &wrong);
    let scale = fg.alpha.max_abs().max(1.0);
    let res = fg.distribution_geodesic_residual(&corrupted, true) / scale;
    let audit = ruled_case_check(&def, &x, 1e-8, 3).unwrap();
    let flagged = audit
        .iter()
        .find(|a| a.name == "corrupted_distribution_rejected")
        .is_some_and(|a| a.pass);
    if !(res > RULED_TOL && flagged) {
        return Err(format!("corrupted Delta_beta residual {res:.2e}"));
    }
    notes.push("corrupted Delta_beta rejected");

    // selftest exit codes
    let (code, _) = exit_of(&["selftest"]);
    if code != Some(0) {
        return Err(format!("pristine selftest exit {code:?}"));
    }
    let (code, err) = exit_of(&["selftest", "--tol-flat", "1e-20"]);
    if code == Some(0) || !err.contains("extension_flat") {
        return Err(format!("misconfigured selftest exit {code:?}: {err}"));
    }
    let dir = tempfile::tempdir().unwrap();
    let mut m = nullitylab::catalog::Manifest::catalog();
    m.immersions[1].expected.as_mut().unwrap().nu_g = Some(7);
    let path = dir.path().join("m.json");
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let (code, err) = exit_of(&["selftest", "--manifest", path.to_str().unwrap()]);
    if code != Some(3) || !err.contains("nu_g expected 7") {
        return Err(format!(
            "corrupted-annotation selftest exit {code:?}: {err}"
        ));
    }
    notes.push("selftest exits 0 / 4 / 3");
    Ok(notes.join(", "))
}

fn main() -> ExitCode {
    let (c1, c2) = crit1_2();
    let results: Vec<(&str, Outcome)> = vec![
        ("chern-kuiper inequalities", c1),
        ("dimension identity and rank bounds", c2),
        ("flat extreme on the clifford torus", crit3()),
        ("moore nullity vs brute force", crit4()),
        ("moore diagonalization", crit5()),
        ("phi codazzi and bianchi identities", crit6()),
        ("composition extension reconstruction", crit7()),
        ("codimension three extension", crit8()),
        ("ruled case", crit9()),
        ("negative controls", crit10()),
    ];
    let mut ok = true;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                ok = false;
                println!("FAIL {:>2} {name}: {d}", i + 1);
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
