//! Ruled extensions `G(x, t) = g(x) + sum_a t_a lambda_a(x)` along the
//! bundle `Lambda`, and the audits run on them.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{curvature_of_phi, lambda_bundle, phi_context, phi_nullities, PhiContext};
use crate::analyzer::{Audit, CaseTag, ClassificationReport};
use crate::catalog::ImmersionDef;
use crate::error::{Error, Result};
use crate::fields::{FieldGeometry, LChoice};
use crate::geometry::{nullity_gamma, point_geometry, relative_nullity};
use crate::jets::{lift, ChartPoint, Jet3};
use crate::linalg::{kernel_subspace, random_orthogonal, range_subspace, Subspace};
use crate::series::{kernel_projector, projector_basis, range_projector, MatSeries};
use crate::taylor::{MonomialBasis, Taylor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    pub choice: LChoice,
    pub tol: f64,
    /// Samples per ruling coordinate, spread over `[-radius, radius]`.
    pub t_count: usize,
    /// Ruling radius; defaults to `0.1 / max |alpha|`.
    pub radius: Option<f64>,
    pub max_halvings: usize,
    /// Largest admissible fraction of samples that fail to be immersions.
    pub drop_limit: f64,
    /// Threshold on `max |R_N|` for the extension to count as flat.
    pub flat_tol: f64,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            choice: LChoice::ComplementOfBetaSpan,
            tol: 1e-8,
            t_count: 3,
            radius: None,
            max_halvings: 4,
            drop_limit: 0.1,
            flat_tol: FLAT_N_TOL,
        }
    }
}

/// One sample of the extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionPoint {
    /// Index into [`RuledExtensionSample::bases`].
    pub base: usize,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    /// Relative nullity of `G`.
    pub nu_g: usize,
    /// Nullity of the induced curvature of `N`.
    pub mu_n: usize,
    pub max_curvature: f64,
}

/// Data of `phi` and of the zero section at one base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseData {
    pub x: ChartPoint,
    pub ell: usize,
    pub rank_lambda: usize,
    pub dim_delta_left: usize,
    pub dim_delta_right: usize,
    pub dim_gamma_left: usize,
    pub dim_gamma_right: usize,
    pub max_r_phi: f64,
    /// Failures of the containments between the nullities of `phi`.
    pub nullity_audit_failures: Vec<String>,
    /// Distance between the relative nullity of `G` on the zero section and
    /// `Delta_phi^r`.
    pub delta_g_distance: f64,
    /// Distance between the relative nullity of `M` inside `N` and `Gamma`.
    pub delta_ghat_vs_gamma: f64,
    /// Same relative nullity computed from `P_L alpha`.
    pub delta_ghat_vs_pl_alpha: f64,
    pub gamma_in_gamma_left: f64,
    /// `|G(x, 0) - g(x)|`.
    pub zero_section_error: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuledExtensionSample {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub radius: f64,
    pub bases: Vec<BaseData>,
    pub points: Vec<ExtensionPoint>,
    pub dropped: usize,
    pub total: usize,
    pub flat_tol: f64,
}

impl RuledExtensionSample {
    pub fn ell(&self) -> usize {
        self.bases.first().map_or(0, |b| b.ell)
    }
}

/// Re-expresses a series in more variables; the new variables come last.
fn embed(t: &Taylor, basis: &Arc<MonomialBasis>) -> Taylor {
    let small = t.basis();
    let mut coeffs = vec![0.0; basis.len()];
    let mut exp = vec![0u8; basis.nvars()];
    for k in 0..small.len() {
        if small.degree(k) > basis.order() {
            continue;
        }
        exp[..small.nvars()].copy_from_slice(small.exponent(k));
        let idx = basis.index_of(&exp).expect("exponent within order");
        coeffs[idx] = t.coeffs()[k];
    }
    Taylor::from_coeffs(basis, coeffs)
}

/// Series of the ruling frame at one base point.
struct Ruling {
    ctx: PhiContext,
    jet: Jet3,
    lambda: Vec<MatSeries>,
    p_dr0: DMatrix<f64>,
    dim_dr: usize,
    dim_dl: usize,
}

fn ruling(def: &ImmersionDef, x: &ChartPoint, cfg: &ExtensionConfig) -> Result<Ruling> {
    let tol = cfg.tol;
    let ctx = phi_context(def, x, &cfg.choice, 3, tol)?;
    let (n, m) = (ctx.fields.n, ctx.fields.m);
    let ps = &ctx.l.p_s;
    let d: Vec<MatSeries> = (0..n).map(|a| ps.derivative(a)).collect();

    let ps2 = ps.truncate(2);
    let mut parts = vec![&ps2];
    parts.extend(d.iter());
    let (p_dr, rank) = kernel_projector(&MatSeries::vstack(&parts), tol);
    let dim_dr = m - rank;

    let comp = MatSeries::identity(ps2.basis(), m).sub(&ps2);
    let cols: Vec<MatSeries> = d
        .iter()
        .map(|da| {
            da.mul(&comp).map_coeffs(m * m, 1, |c| {
                DMatrix::from_column_slice(m * m, 1, c.as_slice())
            })
        })
        .collect();
    let refs: Vec<&MatSeries> = cols.iter().collect();
    let (q_l, rank_l) = kernel_projector(&MatSeries::hstack(&refs), tol);
    let dim_dl = n - rank_l;
    let (p_dl, _) = range_projector(&ctx.fields.jac.truncate(2).mul(&q_l), tol);

    let p_lambda = p_dr.sub(&p_dl);
    let rank_lambda = dim_dr.saturating_sub(dim_dl);
    if rank_lambda == 0 {
        return Err(Error::InvalidParameter(format!(
            "Lambda is trivial at {:?}",
            x.coords
        )));
    }
    let u = projector_basis(p_lambda.value(), rank_lambda);
    let lambda = (0..rank_lambda)
        .map(|a| p_lambda.apply(&u.column(a).into_owned()))
        .collect();
    Ok(Ruling {
        jet: lift(def, x, 2)?,
        p_dr0: p_dr.value().clone(),
        ctx,
        lambda,
        dim_dr,
        dim_dl,
    })
}

/// Exact second-order jet of `G` at `(x, t0)`.
fn extension_jet(r: &Ruling, t0: &[f64]) -> Result<Jet3> {
    let n = r.jet.dim_domain();
    let k = r.lambda.len();
    let basis = MonomialBasis::get(n + k, 2);
    let comps = r
        .jet
        .components()
        .iter()
        .enumerate()
        .map(|(row, g)| {
            let mut c = embed(g, &basis);
            for (a, lam) in r.lambda.iter().enumerate() {
                let t = Taylor::variable(&basis, n + a, t0[a]);
                c = &c + &(&t * &embed(&lam.entry(row, 0), &basis));
            }
            c
        })
        .collect();
    Jet3::from_components(comps)
}

fn base_data(r: &Ruling, cfg: &ExtensionConfig) -> Result<BaseData> {
    let ctx = &r.ctx;
    let tol = cfg.tol;
    let n = ctx.fields.n;
    let rphi = curvature_of_phi(&ctx.tensor);
    let nl = phi_nullities(&ctx.tensor, &rphi, tol);
    let lb = lambda_bundle(&ctx.tensor, &nl);

    let zero = vec![0.0; r.lambda.len()];
    let g0 = point_geometry(&extension_jet(r, &zero)?)?;
    let delta_g = relative_nullity(&g0, tol).map(&g0.tangent_frame);
    let delta_r = range_subspace(&r.p_dr0, 1e-6);
    let zero_section_error = (&g0.value - &ctx.geometry.value).norm();

    // relative nullity of M inside N
    let pg = &ctx.geometry;
    let tn = range_subspace(&g0.tangent_frame, 1e-8).projector();
    let tm = &pg.tangent_frame * pg.tangent_frame.transpose();
    let normal_in_n = tn - tm;
    let pl0 = ctx.l.p_l.value();
    let m = pg.ambient_dim();
    let alpha_kernel = |proj: &DMatrix<f64>| {
        let op = DMatrix::from_fn(m * n, n, |row, i| {
            (proj * pg.normal_ambient(&pg.alpha_vec(i, row / m)))[row % m]
        });
        kernel_subspace(&op, tol)
    };
    let dn = alpha_kernel(&normal_in_n);
    let dl = alpha_kernel(pl0);
    let gamma = nullity_gamma(pg, tol);

    Ok(BaseData {
        x: ctx.x.clone(),
        ell: ctx.tensor.ell,
        rank_lambda: r.lambda.len(),
        dim_delta_left: nl.delta_left.dim(),
        dim_delta_right: nl.delta_right.dim(),
        dim_gamma_left: nl.gamma_left.dim(),
        dim_gamma_right: nl.gamma_right.dim(),
        max_r_phi: rphi.max_abs(),
        nullity_audit_failures: nl
            .audits
            .iter()
            .filter(|a| !a.pass)
            .map(|a| a.name.clone())
            .collect(),
        delta_g_distance: delta_g.distance(&delta_r),
        delta_ghat_vs_gamma: dn.distance(&gamma),
        delta_ghat_vs_pl_alpha: dn.distance(&dl),
        gamma_in_gamma_left: nl.gamma_left.containment_residual(&gamma),
        zero_section_error,
        warning: lb.warning.or_else(|| {
            (r.dim_dr != nl.delta_right.dim() || r.dim_dl != nl.delta_left.dim()).then(|| {
                "nullity dimensions of the field series disagree with the pointwise ones".into()
            })
        }),
    })
}

fn ruling_offsets(k: usize, count: usize, radius: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if count <= 1 {
        vec![0.0]
    } else {
        (0..count)
            .map(|i| -radius + 2.0 * radius * i as f64 / (count - 1) as f64)
            .collect()
    };
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

/// Builds the ruled extension over the base points `xs` and samples it.
pub fn build_ruled_extension(
    def: &ImmersionDef,
    xs: &[ChartPoint],
    cfg: &ExtensionConfig,
) -> Result<RuledExtensionSample> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("no base points".into()));
    }
    if !(cfg.flat_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flatness threshold {}",
            cfg.flat_tol
        )));
    }
    let rulings = xs
        .iter()
        .map(|x| ruling(def, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    let bases = rulings
        .iter()
        .map(|r| base_data(r, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut radius = match cfg.radius {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidParameter(format!("ruling radius {r}"))),
        None => {
            let amax = rulings
                .iter()
                .map(|r| r.ctx.geometry.max_alpha())
                .fold(0.0, f64::max);
            0.1 / amax.max(1e-12)
        }
    };
    let mut last = (0, 0);
    for _ in 0..=cfg.max_halvings {
        let mut points = Vec::new();
        let mut dropped = 0;
        let mut total = 0;
        for (b, r) in rulings.iter().enumerate() {
            for t in ruling_offsets(r.lambda.len(), cfg.t_count, radius) {
                total += 1;
                let pg = match point_geometry(&extension_jet(r, &t)?) {
                    Ok(pg) => pg,
                    Err(Error::NotAnImmersion { .. }) => {
                        dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                points.push(ExtensionPoint {
                    base: b,
                    value: pg.value.iter().cloned().collect(),
                    nu_g: relative_nullity(&pg, cfg.tol).dim(),
                    mu_n: nullity_gamma(&pg, cfg.tol).dim(),
                    max_curvature: pg.max_curvature(),
                    t,
                });
            }
        }
        if dropped as f64 <= cfg.drop_limit * total as f64 {
            return Ok(RuledExtensionSample {
                name: def.name.clone(),
                n: def.n,
                p: def.p,
                radius,
                bases,
                points,
                dropped,
                total,
                flat_tol: cfg.flat_tol,
            });
        }
        last = (dropped, total);
        radius *= 0.5;
    }
    Err(Error::ExtensionImmersion {
        dropped: last.0,
        total: last.1,
    })
}

const SUBSPACE_TOL: f64 = 1e-6;
const FLAT_N_TOL: f64 = 1e-6;
const R_PHI_TOL: f64 = 1e-8;
const RULED_TOL: f64 = 1e-6;

/// Audits of an extension against the classification of its base.
pub fn verify_extension(s: &RuledExtensionSample, report: &ClassificationReport) -> Vec<Audit> {
    let (n, p, ell) = (report.n, report.p, s.ell());
    let mut out = Vec::new();
    let worst = |f: &dyn Fn(&BaseData) -> f64| s.bases.iter().map(f).fold(0.0, f64::max);
    out.push(Audit::residual(
        "zero_section",
        worst(&|b| b.zero_section_error),
        1e-12,
    ));
    out.push(Audit::identity(
        "lambda_rank_eq_ell",
        s.bases.iter().all(|b| b.rank_lambda == b.ell),
    ));
    out.push(Audit::identity(
        "phi_nullity_containments",
        s.bases.iter().all(|b| b.nullity_audit_failures.is_empty()),
    ));
    out.push(Audit::identity(
        "relative_nullity_of_extension",
        s.points
            .iter()
            .all(|q| q.nu_g == s.bases[q.base].dim_delta_right),
    ));
    out.push(Audit::residual(
        "relative_nullity_on_zero_section",
        worst(&|b| b.delta_g_distance),
        SUBSPACE_TOL,
    ));
    out.push(Audit::identity(
        "nullity_of_extension",
        s.points
            .iter()
            .all(|q| q.mu_n == s.bases[q.base].dim_gamma_right),
    ));
    out.push(Audit::residual(
        "relative_nullity_in_extension_eq_gamma",
        worst(&|b| b.delta_ghat_vs_gamma),
        SUBSPACE_TOL,
    ));
    out.push(Audit::residual(
        "relative_nullity_in_extension_eq_ker_pl_alpha",
        worst(&|b| b.delta_ghat_vs_pl_alpha),
        SUBSPACE_TOL,
    ));

    let nus: Vec<usize> = s.points.iter().map(|q| q.nu_g).collect();
    let flat_n = s.points.iter().map(|q| q.max_curvature).fold(0.0, f64::max);
    let (mu, nu) = (report.mu, report.nu_g);
    match report.case {
        CaseTag::CompositionBound => {
            out.push(Audit::residual(
                "phi_flat",
                worst(&|b| b.max_r_phi),
                R_PHI_TOL,
            ));
            let target = (n + ell) - (p - ell);
            out.push(Audit::identity(
                "composition_relative_nullity",
                nus.iter().all(|&v| v == target),
            ));
        }
        CaseTag::RankOneLK1 => {
            let (lo, hi) = ((n + 1) - (p - 1), (n + 1) - (mu - nu));
            out.push(Audit::identity(
                "rank_one_relative_nullity_window",
                nus.iter().all(|&v| lo <= v && v <= hi),
            ));
            out.push(Audit::identity(
                "rank_one_nullity_bound",
                s.points.iter().all(|q| q.mu_n >= mu - nu + q.nu_g),
            ));
            out.push(Audit::residual(
                "gamma_in_gamma_left",
                worst(&|b| b.gamma_in_gamma_left),
                1e-8,
            ));
        }
        _ => {}
    }
    let codim_hyp = p >= 3 && nu + p == mu + 2 && nu + p < n;
    let extends = matches!(report.case, CaseTag::CompositionBound | CaseTag::RankOneLK1);
    if report.case == CaseTag::CompositionBound || (codim_hyp && extends) {
        out.push(Audit::residual("extension_flat", flat_n, s.flat_tol));
    }
    if codim_hyp && extends {
        out.push(Audit::identity(
            "extension_ell_le_2",
            (1..=2).contains(&ell),
        ));
        let allowed: Vec<usize> = (ell..=2).map(|j| (n + ell) - (p - j)).collect();
        out.push(Audit::identity(
            "extension_relative_nullity_values",
            ell <= 2 && nus.iter().all(|v| allowed.contains(v)),
        ));
    }
    out
}

/// Runs [`verify_extension`] base by base and keeps, for every audit name,
/// the worst value. `reports[b]` classifies `sample.bases[b]`.
pub fn verify_extension_over(
    sample: &RuledExtensionSample,
    reports: &[ClassificationReport],
) -> Result<Vec<Audit>> {
    if reports.len() != sample.bases.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reports for {} base points",
            reports.len(),
            sample.bases.len()
        )));
    }
    let mut out: Vec<Audit> = Vec::new();
    for (b, report) in reports.iter().enumerate() {
        let single = RuledExtensionSample {
            bases: vec![sample.bases[b].clone()],
            points: sample
                .points
                .iter()
                .filter(|p| p.base == b)
                .map(|p| ExtensionPoint {
                    base: 0,
                    ..p.clone()
                })
                .collect(),
            ..sample.clone()
        };
        for a in verify_extension(&single, report) {
            match out.iter_mut().find(|o| o.name == a.name) {
                Some(o) => {
                    o.value = o.value.max(a.value);
                    o.pass &= a.pass;
                }
                None => out.push(a),
            }
        }
    }
    Ok(out)
}

/// Audits for a ruled point: `Delta_beta` is totally geodesic and its leaves
/// are open pieces of affine subspaces, with the expected dimension. A
/// constant, randomly rotated distribution of the same rank must fail.
pub fn ruled_case_check(
    def: &ImmersionDef,
    x: &ChartPoint,
    tol: f64,
    seed: u64,
) -> Result<Vec<Audit>> {
    let fg = FieldGeometry::new(def, x, 2, tol)?;
    let (n, p) = (fg.n, fg.m - fg.n);
    let (q, dim) = fg.delta_beta_projector(tol);
    let scale = fg.alpha.max_abs().max(1.0);
    let mut out = vec![
        Audit::identity("delta_beta_rank", dim + p > n),
        Audit::residual(
            "delta_beta_totally_geodesic",
            fg.distribution_geodesic_residual(&q, false) / scale,
            RULED_TOL,
        ),
        Audit::residual(
            "delta_beta_affine_leaves",
            fg.distribution_geodesic_residual(&q, true) / scale,
            RULED_TOL,
        ),
        Audit::residual(
            "delta_beta_integrable",
            fg.bracket_residual(&q) / scale,
            RULED_TOL,
        ),
        Audit::residual(
            "gamma_totally_geodesic",
            fg.distribution_geodesic_residual(&fg.p_gamma, false) / scale,
            RULED_TOL,
        ),
    ];
    if dim > 0 && dim < n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rot = random_orthogonal(n, &mut rng);
        let basis = rot.columns(0, dim).into_owned();
        let wrong = Subspace::span(&basis, tol).projector();
        let corrupted = MatSeries::constant(q.basis(), &wrong);
        let res = fg.distribution_geodesic_residual(&corrupted, true) / scale;
        out.push(Audit::identity(
            "corrupted_distribution_rejected",
            res > 1e-6,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_cover_the_box() {
        let o = ruling_offsets(2, 3, 0.5);
        assert_eq!(o.len(), 9);
        assert!(o.contains(&vec![0.0, 0.0]));
        assert!(o.contains(&vec![-0.5, 0.5]));
        assert_eq!(ruling_offsets(1, 1, 0.5), vec![vec![0.0]]);
    }

    #[test]
    fn embed_keeps_coefficients() {
        let small = MonomialBasis::get(2, 3);
        let big = MonomialBasis::get(3, 2);
        let x = Taylor::variable(&small, 0, 0.5);
        let y = Taylor::variable(&small, 1, -1.0);
        let f = &(&x * &y) + &x;
        let g = embed(&f, &big);
        assert_eq!(g.value(), f.value());
        assert_eq!(g.hessian(0, 1), f.hessian(0, 1));
        assert_eq!(g.gradient(2), 0.0);
    }
}
