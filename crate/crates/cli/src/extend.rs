use std::collections::BTreeSet;
use std::fmt::Write as _;

use nullitylab::analyzer::{analyze_point, Audit, CaseTag, Grid};
use nullitylab::catalog::ImmersionDef;
use nullitylab::extension::{
    bianchi1_residual, build_ruled_extension, curvature_of_phi, phi_context, ruled_case_check,
    verify_extension_over, BaseData, ExtensionConfig, ExtensionPoint, BIANCHI1_TOL, BIANCHI2_TOL,
    CODAZZI_TOL,
};
use nullitylab::fields::LChoice;
use rayon::prelude::*;
use serde::Serialize;

use crate::analyze::analyzer_config;
use crate::config::{ConfigEcho, Format, RunConfig};
use crate::failure::Failure;
use crate::output::{emit, to_json};
use crate::SCHEMA_VERSION;

pub const DEFAULT_COUNT: usize = 2;

#[derive(Debug, Serialize)]
pub struct BaseRecord {
    pub index: usize,
    pub x: Vec<f64>,
    pub case: CaseTag,
    pub mu: usize,
    pub nu_g: usize,
    pub ell: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codazzi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bianchi1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bianchi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<BaseData>,
}

#[derive(Debug, Default, Serialize)]
pub struct ExtendSummary {
    pub nu_ext: BTreeSet<usize>,
    pub dim_nullity_ext: BTreeSet<usize>,
    pub max_r_phi: f64,
    pub max_curvature_ext: f64,
    pub radius: Option<f64>,
    pub dropped: usize,
    pub total: usize,
    pub all_pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ExtendOutput {
    pub schema_version: u32,
    pub command: &'static str,
    pub immersion: String,
    pub config: ConfigEcho,
    /// `extension` or `ruled`.
    pub route: &'static str,
    pub bases: Vec<BaseRecord>,
    pub samples: Vec<ExtensionPoint>,
    pub audits: Vec<Audit>,
    pub summary: ExtendSummary,
}

fn merge(into: &mut Vec<Audit>, audits: Vec<Audit>) {
    for a in audits {
        match into.iter_mut().find(|o| o.name == a.name) {
            Some(o) => {
                o.value = o.value.max(a.value);
                o.pass &= a.pass;
            }
            None => into.push(a),
        }
    }
}

pub fn extend(def: &ImmersionDef, cfg: &RunConfig) -> Result<ExtendOutput, Failure> {
    let echo = cfg.echo(def, DEFAULT_COUNT)?;
    let grid = Grid::new(echo.grid.clone(), echo.chart_box.clone())?;
    let xs: Vec<_> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let acfg = analyzer_config(cfg);
    let reports = xs
        .par_iter()
        .map(|x| analyze_point(def, x, &acfg))
        .collect::<Result<Vec<_>, _>>()?;

    let extension = |c: CaseTag| matches!(c, CaseTag::CompositionBound | CaseTag::RankOneLK1);
    let route = if reports.iter().all(|r| extension(r.case)) {
        "extension"
    } else if reports.iter().all(|r| r.case == CaseTag::RankOneLK0Ruled) {
        "ruled"
    } else {
        let bad = reports
            .iter()
            .find(|r| !extension(r.case))
            .expect("some point is off route");
        return Err(Failure::Mismatch(format!(
            "`{}` is {} at {:?}; extend needs CompositionBound, RankOneL_k1 or RankOneL_k0_Ruled throughout",
            def.name, bad.case, bad.x.coords
        )));
    };

    let mut bases: Vec<BaseRecord> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| BaseRecord {
            index: i,
            x: r.x.coords.clone(),
            case: r.case,
            mu: r.mu,
            nu_g: r.nu_g,
            ell: r.ell,
            k: r.k,
            codazzi: None,
            bianchi1: None,
            bianchi2: None,
            phi: None,
        })
        .collect();
    let mut audits = Vec::new();
    let mut summary = ExtendSummary::default();
    let mut samples = Vec::new();

    if route == "ruled" {
        for x in &xs {
            merge(
                &mut audits,
                ruled_case_check(def, x, cfg.tol_rank, cfg.seed)?,
            );
        }
    } else {
        let identities = xs
            .par_iter()
            .map(|x| {
                let ctx = phi_context(def, x, &LChoice::ComplementOfBetaSpan, 2, cfg.tol_rank)?;
                let r = curvature_of_phi(&ctx.tensor);
                Ok((
                    ctx.codazzi_residual()?,
                    bianchi1_residual(&r),
                    ctx.bianchi2_residual()?,
                ))
            })
            .collect::<Result<Vec<_>, nullitylab::Error>>()?;
        let mut worst = [0.0f64; 3];
        for (b, (c, b1, b2)) in bases.iter_mut().zip(identities) {
            b.codazzi = Some(c);
            b.bianchi1 = Some(b1);
            b.bianchi2 = Some(b2);
            worst = [worst[0].max(c), worst[1].max(b1), worst[2].max(b2)];
        }
        audits.push(Audit::residual("codazzi", worst[0], CODAZZI_TOL));
        audits.push(Audit::residual("bianchi1", worst[1], BIANCHI1_TOL));
        audits.push(Audit::residual("bianchi2", worst[2], BIANCHI2_TOL));

        let ecfg = ExtensionConfig {
            tol: cfg.tol_rank,
            flat_tol: cfg.tol_flat,
            ..ExtensionConfig::default()
        };
        let sample = build_ruled_extension(def, &xs, &ecfg)?;
        merge(&mut audits, verify_extension_over(&sample, &reports)?);
        for (b, data) in bases.iter_mut().zip(&sample.bases) {
            summary.max_r_phi = summary.max_r_phi.max(data.max_r_phi);
            b.phi = Some(data.clone());
        }
        for p in &sample.points {
            summary.nu_ext.insert(p.nu_g);
            summary.dim_nullity_ext.insert(p.mu_n);
            summary.max_curvature_ext = summary.max_curvature_ext.max(p.max_curvature);
        }
        summary.radius = Some(sample.radius);
        summary.dropped = sample.dropped;
        summary.total = sample.total;
        samples = sample.points;
    }
    summary.all_pass = audits.iter().all(|a| a.pass);
    Ok(ExtendOutput {
        schema_version: SCHEMA_VERSION,
        command: "extend",
        immersion: def.name.clone(),
        config: echo,
        route,
        bases,
        samples,
        audits,
        summary,
    })
}

fn render_text(o: &ExtendOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "immersion {}  route {}  base points {}",
        o.immersion,
        o.route,
        o.bases.len()
    );
    if o.route == "extension" {
        let _ = writeln!(
            s,
            "  relative nullity of the extension {:?}",
            o.summary.nu_ext
        );
        let _ = writeln!(
            s,
            "  nullity of the extension          {:?}",
            o.summary.dim_nullity_ext
        );
        let _ = writeln!(
            s,
            "  max |R_phi| {:.3e}   max |R_N| {:.3e}",
            o.summary.max_r_phi, o.summary.max_curvature_ext
        );
        let _ = writeln!(
            s,
            "  samples {} (dropped {})",
            o.summary.total, o.summary.dropped
        );
    }
    for a in &o.audits {
        let flag = if a.pass { "pass" } else { "FAIL" };
        let _ = writeln!(s, "  {flag}  {:<46} {:.3e}", a.name, a.value);
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let def = cfg.single_target()?;
    let out = extend(def, cfg)?;
    let text = match cfg.format {
        Format::Json => to_json(&out),
        Format::Text => render_text(&out),
    };
    emit(&text, cfg.out.as_deref())?;
    let failed: Vec<_> = out
        .audits
        .iter()
        .filter(|a| !a.pass)
        .map(|a| a.name.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("failed audits {failed:?}")))
    }
}
