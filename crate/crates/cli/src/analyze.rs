use std::collections::BTreeMap;
use std::fmt::Write as _;

use nullitylab::analyzer::{
    analyze_point, mark_stratum_boundaries, AnalyzerConfig, CaseTag, ClassificationReport, Grid,
};
use nullitylab::catalog::{Expected, ImmersionDef};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigEcho, Format, RunConfig};
use crate::failure::Failure;
use crate::output::{emit, to_json};
use crate::SCHEMA_VERSION;

pub const DEFAULT_COUNT: usize = 5;

#[derive(Debug, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub points: usize,
    pub errors: usize,
    pub case_histogram: BTreeMap<String, usize>,
    /// Largest value of every residual audit.
    pub worst_residuals: BTreeMap<String, f64>,
    /// Number of points at which each audit failed.
    pub failed_audits: BTreeMap<String, usize>,
    pub chern_kuiper_violations: usize,
    pub stratum_boundaries: usize,
    pub annotation_mismatches: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeOutput {
    pub schema_version: u32,
    pub command: &'static str,
    pub immersion: String,
    pub config: ConfigEcho,
    pub points: Vec<PointRecord>,
    pub summary: Summary,
}

pub fn analyzer_config(cfg: &RunConfig) -> AnalyzerConfig {
    AnalyzerConfig {
        tol_rank: cfg.tol_rank,
        tol_flat: cfg.tol_flat,
        seed: cfg.seed,
        ..AnalyzerConfig::default()
    }
}

/// Differences between a report and the annotations of its immersion.
pub fn annotation_mismatches(expected: &Expected, r: &ClassificationReport) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |name: &str, want: Option<usize>, got: usize| {
        if let Some(w) = want {
            if w != got {
                out.push(format!("{name} expected {w}, got {got}"));
            }
        }
    };
    check("mu", expected.mu, r.mu);
    check("nu_g", expected.nu_g, r.nu_g);
    check("dim_s_beta", expected.dim_s_beta, r.dim_s_beta);
    check("dim_delta_beta", expected.dim_delta_beta, r.dim_delta_beta);
    check("ell", expected.ell, r.ell);
    check("k", expected.k, r.k);
    if let Some(case) = expected.case {
        if case != r.case && r.case != CaseTag::StratumBoundary {
            out.push(format!("case expected {case}, got {}", r.case));
        }
    }
    out
}

pub fn analyze(def: &ImmersionDef, cfg: &RunConfig) -> Result<AnalyzeOutput, Failure> {
    let echo = cfg.echo(def, DEFAULT_COUNT)?;
    let grid = Grid::new(echo.grid.clone(), echo.chart_box.clone())?;
    let acfg = analyzer_config(cfg);
    let results: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| analyze_point(def, &grid.point(i), &acfg))
        .collect();

    let mut summary = Summary {
        points: grid.len(),
        ..Summary::default()
    };
    let mut records: Vec<PointRecord> = Vec::with_capacity(grid.len());
    for (i, res) in results.into_iter().enumerate() {
        let x = grid.point(i).coords;
        let (report, error) = match res {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        records.push(PointRecord {
            index: i,
            x,
            report,
            error,
        });
    }
    if records.iter().all(|r| r.report.is_some()) {
        let mut reports: Vec<_> = records
            .iter_mut()
            .map(|r| r.report.take().unwrap())
            .collect();
        mark_stratum_boundaries(&grid, &mut reports);
        for (rec, rep) in records.iter_mut().zip(reports) {
            rec.report = Some(rep);
        }
    }

    for rec in &records {
        let Some(r) = &rec.report else {
            summary.errors += 1;
            continue;
        };
        *summary
            .case_histogram
            .entry(r.case.to_string())
            .or_default() += 1;
        if r.case == CaseTag::StratumBoundary {
            summary.stratum_boundaries += 1;
        }
        for a in &r.audits {
            if a.threshold > 0.0 {
                let w = summary.worst_residuals.entry(a.name.clone()).or_insert(0.0);
                *w = w.max(a.value);
            }
            if !a.pass {
                *summary.failed_audits.entry(a.name.clone()).or_default() += 1;
                if a.name == "chern_kuiper" {
                    summary.chern_kuiper_violations += 1;
                }
            }
        }
        if let Some(e) = &def.expected {
            for m in annotation_mismatches(e, r) {
                summary
                    .annotation_mismatches
                    .push(format!("point {}: {m}", rec.index));
            }
        }
    }
    Ok(AnalyzeOutput {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        immersion: def.name.clone(),
        config: echo,
        points: records,
        summary,
    })
}

fn render_text(o: &AnalyzeOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "immersion {}  grid {:?}  points {}",
        o.immersion, o.config.grid, o.summary.points
    );
    for (case, count) in &o.summary.case_histogram {
        let pct = 100.0 * *count as f64 / o.summary.points as f64;
        let _ = writeln!(s, "  {case:<26} {count:>6}  {pct:6.2}%");
    }
    let _ = writeln!(s, "worst residuals");
    for (name, v) in &o.summary.worst_residuals {
        let _ = writeln!(s, "  {name:<34} {v:.3e}");
    }
    let _ = writeln!(
        s,
        "chern-kuiper violations {}",
        o.summary.chern_kuiper_violations
    );
    let _ = writeln!(s, "stratum boundaries {}", o.summary.stratum_boundaries);
    if o.summary.errors > 0 {
        let _ = writeln!(s, "points with errors {}", o.summary.errors);
    }
    for (name, count) in &o.summary.failed_audits {
        let _ = writeln!(s, "FAILED {name} at {count} points");
    }
    for m in &o.summary.annotation_mismatches {
        let _ = writeln!(s, "MISMATCH {m}");
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let def = cfg.single_target()?;
    let out = analyze(def, cfg)?;
    let text = match cfg.format {
        Format::Json => to_json(&out),
        Format::Text => render_text(&out),
    };
    emit(&text, cfg.out.as_deref())?;
    let s = &out.summary;
    if s.errors > 0 || !s.failed_audits.is_empty() {
        let names: Vec<_> = s.failed_audits.keys().cloned().collect();
        return Err(Failure::Invariant(format!(
            "{} point errors, failed audits {names:?}",
            s.errors
        )));
    }
    if !s.annotation_mismatches.is_empty() {
        return Err(Failure::Mismatch(format!(
            "{} disagrees with its annotations: {}",
            out.immersion, s.annotation_mismatches[0]
        )));
    }
    Ok(())
}
