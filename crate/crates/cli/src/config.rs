use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nullitylab::catalog::{list_catalog, ImmersionDef, Manifest};
use serde::Serialize;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Catalog member to run on (case-insensitive).
    #[arg(long)]
    pub immersion: Option<String>,
    /// JSON manifest to read immersions from instead of the built-in catalog.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Samples per axis, e.g. `9x9` or `5` for every axis.
    #[arg(long)]
    pub grid: Option<String>,
    /// Chart box `lo:hi,lo:hi,...`; defaults to the immersion's domain.
    #[arg(long = "box")]
    pub chart_box: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rank: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_flat: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub targets: Vec<ImmersionDef>,
    pub grid: Option<String>,
    pub chart_box: Option<String>,
    pub tol_rank: f64,
    pub tol_flat: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Echo of the configuration written into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub grid: Vec<usize>,
    #[serde(rename = "box")]
    pub chart_box: Vec<[f64; 2]>,
    pub tol_rank: f64,
    pub tol_flat: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_args(args: CommonArgs, default_format: Format) -> Result<Self, Failure> {
        for (name, v) in [("--tol-rank", args.tol_rank), ("--tol-flat", args.tol_flat)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let pool: Vec<ImmersionDef> = match &args.manifest {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
                Manifest::from_json(&text)
                    .map_err(|e| {
                        Failure::Config(format!("invalid manifest {}: {e}", path.display()))
                    })?
                    .immersions
            }
            None => list_catalog(),
        };
        let targets = match &args.immersion {
            Some(name) => {
                let found = pool
                    .iter()
                    .find(|d| d.name.eq_ignore_ascii_case(name))
                    .cloned()
                    .ok_or_else(|| Failure::Config(format!("unknown immersion `{name}`")))?;
                vec![found]
            }
            None => pool,
        };
        Ok(Self {
            targets,
            grid: args.grid,
            chart_box: args.chart_box,
            tol_rank: args.tol_rank,
            tol_flat: args.tol_flat,
            seed: args.seed,
            out: args.out,
            format: args.format.unwrap_or(default_format),
        })
    }

    /// The single immersion of commands that work on one member.
    pub fn single_target(&self) -> Result<&ImmersionDef, Failure> {
        match self.targets.as_slice() {
            [one] => Ok(one),
            _ => Err(Failure::Config(
                "select an immersion with --immersion".into(),
            )),
        }
    }

    pub fn echo(&self, def: &ImmersionDef, default_count: usize) -> Result<ConfigEcho, Failure> {
        Ok(ConfigEcho {
            grid: parse_grid(self.grid.as_deref(), def.n, default_count)?,
            chart_box: resolve_box(self.chart_box.as_deref(), def)?,
            tol_rank: self.tol_rank,
            tol_flat: self.tol_flat,
            seed: self.seed,
        })
    }
}

pub fn parse_grid(
    spec: Option<&str>,
    dim: usize,
    default_count: usize,
) -> Result<Vec<usize>, Failure> {
    let Some(spec) = spec else {
        return Ok(vec![default_count; dim]);
    };
    let counts = spec
        .split(['x', 'X'])
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Config(format!("malformed --grid `{spec}`")))?;
    let counts = match counts.as_slice() {
        [c] => vec![*c; dim],
        _ => counts,
    };
    if counts.len() != dim {
        return Err(Failure::Config(format!(
            "--grid `{spec}` has {} axes, the chart has {dim}",
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Failure::Config(
            "--grid needs at least 2 samples per axis".into(),
        ));
    }
    Ok(counts)
}

pub fn resolve_box(spec: Option<&str>, def: &ImmersionDef) -> Result<Vec<[f64; 2]>, Failure> {
    let chart_box = match spec {
        None => def.domain.clone(),
        Some(spec) => spec
            .split(',')
            .map(|axis| {
                let (lo, hi) = axis
                    .split_once(':')
                    .ok_or_else(|| Failure::Config(format!("malformed --box axis `{axis}`")))?;
                let lo = lo.trim().parse::<f64>();
                let hi = hi.trim().parse::<f64>();
                match (lo, hi) {
                    (Ok(lo), Ok(hi)) => Ok([lo, hi]),
                    _ => Err(Failure::Config(format!("malformed --box axis `{axis}`"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if chart_box.len() != def.n {
        return Err(Failure::Config(format!(
            "--box has {} axes, `{}` has {}",
            chart_box.len(),
            def.name,
            def.n
        )));
    }
    for ([lo, hi], [dlo, dhi]) in chart_box.iter().zip(&def.domain) {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Failure::Config(format!(
                "box [{lo}, {hi}] must be finite and ordered; pass --box"
            )));
        }
        if lo < dlo || hi > dhi {
            return Err(Failure::Config(format!(
                "box [{lo}, {hi}] leaves the domain [{dlo}, {dhi}] of `{}`",
                def.name
            )));
        }
    }
    Ok(chart_box)
}
