use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use nullitylab::analyzer::{analyze_point, build_beta, AnalyzerConfig, Audit, CaseTag};
use nullitylab::bilinear::{
    diagonal_defect, find_regular_element, moore_diagonalize, moore_nullity, nullity_brute_force,
    rho_orthonormality, BilinearForm,
};
use nullitylab::catalog::ImmersionDef;
use nullitylab::extension::{
    bianchi1_residual, build_ruled_extension, curvature_of_phi, phi_context, phi_nullities,
    ruled_case_check, verify_extension_over, ExtensionConfig, BIANCHI1_TOL, BIANCHI2_TOL,
    CODAZZI_TOL,
};
use nullitylab::fields::LChoice;
use nullitylab::geometry::{nullity_gamma, point_geometry};
use nullitylab::jets::{lift, ChartPoint};
use nullitylab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analyze::{analyzer_config, annotation_mismatches};
use crate::config::{Format, RunConfig};
use crate::failure::Failure;
use crate::output::{emit, to_json};
use crate::SCHEMA_VERSION;

/// Random points per member in addition to the box center.
pub const RANDOM_POINTS: usize = 6;
const SUBSPACE_TOL: f64 = 1e-8;
const DIAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Family {
    pub worst: f64,
    pub threshold: f64,
    pub checks: usize,
    pub failures: usize,
    /// First few failing checks, `member: audit`.
    pub examples: Vec<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct SelftestOutput {
    pub schema_version: u32,
    pub command: &'static str,
    pub members: Vec<String>,
    pub points: usize,
    pub families: BTreeMap<String, Family>,
    pub annotation_mismatches: Vec<String>,
    pub all_pass: bool,
}

/// Per-member collection of audit outcomes keyed by family.
#[derive(Default)]
struct Tally {
    entries: Vec<(&'static str, String, Audit)>,
    mismatches: Vec<String>,
    points: usize,
}

impl Tally {
    fn push(&mut self, family: &'static str, member: &str, a: Audit) {
        self.entries.push((family, member.to_string(), a));
    }

    fn error(&mut self, family: &'static str, member: &str, what: &str, e: &Error) {
        let mut a = Audit::identity(&format!("{what} ({e})"), false);
        a.value = f64::INFINITY;
        self.push(family, member, a);
    }
}

/// Seeded points in the member's box shrunk by 10% on every side.
pub fn sample_points(def: &ImmersionDef, count: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![def.center()];
    for _ in 0..count {
        let coords = def
            .domain
            .iter()
            .map(|&[lo, hi]| {
                let (lo, hi) = (lo.max(-3.0), hi.min(3.0));
                let pad = 0.1 * (hi - lo);
                if hi - lo > 2.0 * pad && pad > 0.0 {
                    rng.gen_range(lo + pad..hi - pad)
                } else {
                    0.5 * (lo + hi)
                }
            })
            .collect();
        out.push(ChartPoint::new(coords));
    }
    out
}

/// The L choices used for the φ identities: `S(beta)^perp`, the full normal
/// bundle and the normal projection of one fixed ambient vector.
pub fn l_choices(def: &ImmersionDef) -> Vec<LChoice> {
    let m = def.n + def.p;
    let v: Vec<f64> = (0..m)
        .map(|i| 1.0 + 0.37 * i as f64 - 0.1 * (i * i) as f64)
        .collect();
    vec![
        LChoice::ComplementOfBetaSpan,
        LChoice::FullNormal,
        LChoice::Projected { vectors: vec![v] },
    ]
}

fn pointwise(def: &ImmersionDef, x: &ChartPoint, cfg: &AnalyzerConfig, t: &mut Tally) {
    let name = &def.name;
    t.points += 1;
    let report = match analyze_point(def, x, cfg) {
        Ok(r) => r,
        Err(e) => return t.error("report", name, "analyze_point", &e),
    };
    for a in &report.audits {
        let family = if a.name == "beta_flatness" {
            "beta_flatness"
        } else {
            "report"
        };
        t.push(family, name, a.clone());
    }
    if let Some(e) = &def.expected {
        for m in annotation_mismatches(e, &report) {
            t.mismatches.push(format!("{name} at {:?}: {m}", x.coords));
        }
    }

    let pg = match lift(def, x, 2).and_then(|j| point_geometry(&j)) {
        Ok(pg) => pg,
        Err(e) => return t.error("report", name, "point_geometry", &e),
    };
    let gamma = nullity_gamma(&pg, cfg.tol_rank);
    match build_beta(&pg, &gamma) {
        Ok(beta) => {
            let reg = find_regular_element(&beta, cfg.trials, cfg.seed);
            match moore_nullity(&beta, &reg, cfg.tol_flat) {
                Ok(m) => {
                    let brute = nullity_brute_force(&beta, cfg.tol_rank);
                    t.push(
                        "moore",
                        name,
                        Audit::residual("moore_vs_brute_force", m.distance(&brute), SUBSPACE_TOL),
                    );
                    t.push(
                        "moore",
                        name,
                        Audit::identity("moore_dimension_bound", m.dim() + beta.dim_target >= pg.n),
                    );
                }
                Err(e) => t.error("moore", name, "moore_nullity", &e),
            }
        }
        Err(e) => t.error("moore", name, "build_beta", &e),
    }

    let mu = gamma.dim();
    if mu > 0 {
        let b = BilinearForm::from_fn(mu, mu, pg.p, |i, j| {
            let u: DVector<f64> = gamma.basis.column(i).into_owned();
            let v: DVector<f64> = gamma.basis.column(j).into_owned();
            pg.alpha_on(&u, &v)
        });
        let scale = b.max_norm().max(1.0);
        let nullity = nullity_brute_force(&b, cfg.tol_rank);
        match moore_diagonalize(&b, &nullity) {
            Ok(pairs) => {
                t.push(
                    "diagonalization",
                    name,
                    Audit::residual(
                        "diagonal_defect",
                        diagonal_defect(&b, &pairs) / scale,
                        DIAG_TOL,
                    ),
                );
                t.push(
                    "diagonalization",
                    name,
                    Audit::residual("rho_orthonormality", rho_orthonormality(&pairs), DIAG_TOL),
                );
            }
            Err(e) => t.error("diagonalization", name, "moore_diagonalize", &e),
        }
    }

    for choice in l_choices(def) {
        let ctx = match phi_context(def, x, &choice, 2, cfg.tol_rank) {
            Ok(c) => c,
            // L = S(beta)^perp is empty where ell = 0
            Err(Error::InvalidParameter(_)) => continue,
            Err(e) => return t.error("phi_identities", name, "phi_context", &e),
        };
        let r = curvature_of_phi(&ctx.tensor);
        match (ctx.codazzi_residual(), ctx.bianchi2_residual()) {
            (Ok(c), Ok(b2)) => {
                t.push(
                    "phi_identities",
                    name,
                    Audit::residual("codazzi", c, CODAZZI_TOL),
                );
                t.push(
                    "phi_identities",
                    name,
                    Audit::residual("bianchi1", bianchi1_residual(&r), BIANCHI1_TOL),
                );
                t.push(
                    "phi_identities",
                    name,
                    Audit::residual("bianchi2", b2, BIANCHI2_TOL),
                );
            }
            (Err(e), _) | (_, Err(e)) => t.error("phi_identities", name, "phi residuals", &e),
        }
        for a in phi_nullities(&ctx.tensor, &r, cfg.tol_rank).audits {
            t.push("phi_identities", name, a);
        }
    }
}

fn extension_checks(def: &ImmersionDef, xs: &[ChartPoint], cfg: &AnalyzerConfig, t: &mut Tally) {
    let name = &def.name;
    let reports: Vec<_> = xs
        .iter()
        .filter_map(|x| analyze_point(def, x, cfg).ok())
        .collect();
    if reports.len() != xs.len() {
        return;
    }
    let ext = |c: CaseTag| matches!(c, CaseTag::CompositionBound | CaseTag::RankOneLK1);
    if reports.iter().all(|r| ext(r.case)) {
        let ecfg = ExtensionConfig {
            tol: cfg.tol_rank,
            flat_tol: cfg.tol_flat,
            ..ExtensionConfig::default()
        };
        let audits =
            build_ruled_extension(def, xs, &ecfg).and_then(|s| verify_extension_over(&s, &reports));
        match audits {
            Ok(audits) => audits
                .into_iter()
                .for_each(|a| t.push("extension", name, a)),
            Err(e) => t.error("extension", name, "build_ruled_extension", &e),
        }
    } else if reports.iter().all(|r| r.case == CaseTag::RankOneLK0Ruled) {
        for x in xs {
            match ruled_case_check(def, x, cfg.tol_rank, cfg.seed) {
                Ok(audits) => audits.into_iter().for_each(|a| t.push("ruled", name, a)),
                Err(e) => t.error("ruled", name, "ruled_case_check", &e),
            }
        }
    }
}

fn member(def: &ImmersionDef, cfg: &AnalyzerConfig) -> Tally {
    let mut t = Tally::default();
    let xs = sample_points(def, RANDOM_POINTS, cfg.seed);
    for x in &xs {
        pointwise(def, x, cfg, &mut t);
    }
    // extensions are built over the center and two more points
    extension_checks(def, &xs[..3.min(xs.len())], cfg, &mut t);
    t
}

pub fn selftest(cfg: &RunConfig) -> SelftestOutput {
    let acfg = analyzer_config(cfg);
    let tallies: Vec<Tally> = cfg.targets.par_iter().map(|d| member(d, &acfg)).collect();
    let mut out = SelftestOutput {
        schema_version: SCHEMA_VERSION,
        command: "selftest",
        members: cfg.targets.iter().map(|d| d.name.clone()).collect(),
        ..SelftestOutput::default()
    };
    for t in tallies {
        out.points += t.points;
        out.annotation_mismatches.extend(t.mismatches);
        for (family, member, a) in t.entries {
            let f = out.families.entry(family.to_string()).or_default();
            f.checks += 1;
            if a.value.is_finite() {
                f.worst = f.worst.max(a.value);
            }
            f.threshold = f.threshold.max(a.threshold);
            if !a.pass {
                f.failures += 1;
                if f.examples.len() < 5 {
                    f.examples.push(format!("{member}: {}", a.name));
                }
            }
        }
    }
    out.all_pass =
        out.annotation_mismatches.is_empty() && out.families.values().all(|f| f.failures == 0);
    out
}

fn render_text(o: &SelftestOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "selftest over {} members, {} points",
        o.members.len(),
        o.points
    );
    for (name, f) in &o.families {
        let flag = if f.failures == 0 { "pass" } else { "FAIL" };
        let _ = writeln!(
            s,
            "  {flag}  {name:<16} worst {:.3e}  threshold {:.1e}  checks {:>5}  failures {}",
            f.worst, f.threshold, f.checks, f.failures
        );
        for e in &f.examples {
            let _ = writeln!(s, "        {e}");
        }
    }
    for m in &o.annotation_mismatches {
        let _ = writeln!(s, "  MISMATCH {m}");
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let out = selftest(cfg);
    let text = match cfg.format {
        Format::Json => to_json(&out),
        Format::Text => render_text(&out),
    };
    emit(&text, cfg.out.as_deref())?;
    let failing: Vec<String> = out
        .families
        .iter()
        .filter(|(_, f)| f.failures > 0)
        .map(|(name, f)| match f.examples.first() {
            Some(e) => format!("{name} ({e})"),
            None => name.clone(),
        })
        .collect();
    if !failing.is_empty() {
        return Err(Failure::Invariant(format!(
            "failing families: {}",
            failing.join(", ")
        )));
    }
    if let Some(m) = out.annotation_mismatches.first() {
        return Err(Failure::Mismatch(format!(
            "{} annotation mismatches, first: {m}",
            out.annotation_mismatches.len()
        )));
    }
    Ok(())
}
