//! Point classification.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{
    find_regular_element, flatness_residual, moore_nullity, span_of, BilinearForm, FLAT_TOL,
};
use crate::catalog::ImmersionDef;
use crate::error::{Error, Result};
use crate::geometry::{nullity_gamma, point_geometry, relative_nullity, PointGeometry};
use crate::jets::{lift, ChartPoint};
use crate::linalg::{kernel_subspace, numerical_rank, Subspace, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    TrivialEqualNullities,
    FlatExtreme,
    CompositionBound,
    #[serde(rename = "RankOneL_k1")]
    RankOneLK1,
    #[serde(rename = "RankOneL_k0_Ruled")]
    RankOneLK0Ruled,
    Unclassified,
    StratumBoundary,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TrivialEqualNullities => "TrivialEqualNullities",
            Self::FlatExtreme => "FlatExtreme",
            Self::CompositionBound => "CompositionBound",
            Self::RankOneLK1 => "RankOneL_k1",
            Self::RankOneLK0Ruled => "RankOneL_k0_Ruled",
            Self::Unclassified => "Unclassified",
            Self::StratumBoundary => "StratumBoundary",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tolerances and seeds for the pointwise analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub tol_rank: f64,
    pub tol_flat: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            tol_rank: DEFAULT_TOL,
            tol_flat: FLAT_TOL,
            seed: 0,
            trials: 16,
        }
    }
}

/// A named check. Integer identities use `value` as the defect and a zero
/// threshold; residual checks pass when `value < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Audit {
    pub fn residual(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            pass: value < threshold,
        }
    }

    pub fn identity(name: &str, holds: bool) -> Self {
        Self {
            name: name.to_string(),
            value: if holds { 0.0 } else { 1.0 },
            threshold: 0.0,
            pass: holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub x: ChartPoint,
    pub n: usize,
    pub p: usize,
    pub mu: usize,
    pub nu_g: usize,
    pub dim_delta_beta: usize,
    pub dim_s_beta: usize,
    pub dim_delta_beta_plus_gamma: usize,
    pub ell: usize,
    pub k: usize,
    pub case: CaseTag,
    /// `i` or `ii` for the two codimension-two alternatives.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub codim2: Option<String>,
    /// Whether `nu_g <= n - p - 1` holds at this point.
    pub nu_bound: bool,
    pub audits: Vec<Audit>,
}

impl ClassificationReport {
    pub fn audit(&self, name: &str) -> Option<&Audit> {
        self.audits.iter().find(|a| a.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.audits.iter().all(|a| a.pass)
    }

    /// Dimensions that must agree between neighbouring samples of one stratum.
    pub fn signature(&self) -> (usize, usize, usize, usize, usize) {
        (
            self.mu,
            self.nu_g,
            self.dim_delta_beta,
            self.dim_s_beta,
            self.k,
        )
    }
}

/// `beta = alpha|_{TM x Gamma}` in frame coordinates: left slot the full
/// tangent space, right slot the columns of `gamma`, values in the normal frame.
pub fn build_beta(pg: &PointGeometry, gamma: &Subspace) -> Result<BilinearForm> {
    if gamma.ambient_dim() != pg.n {
        return Err(Error::Containment(1.0));
    }
    let orth = (gamma.basis.transpose() * &gamma.basis
        - DMatrix::<f64>::identity(gamma.dim(), gamma.dim()))
    .amax();
    if orth > 1e-8 {
        return Err(Error::Containment(orth));
    }
    Ok(BilinearForm::from_fn(pg.n, gamma.dim(), pg.p, |i, j| {
        let mut e = DVector::zeros(pg.n);
        e[i] = 1.0;
        pg.alpha_on(&e, &gamma.basis.column(j).into_owned())
    }))
}

/// Left nullity of `beta` through a regular element.
pub fn delta_beta(pg: &PointGeometry, gamma: &Subspace, cfg: &AnalyzerConfig) -> Result<Subspace> {
    let beta = build_beta(pg, gamma)?;
    let reg = find_regular_element(&beta, cfg.trials, cfg.seed);
    let mut out = moore_nullity(&beta, &reg, cfg.tol_flat)?;
    if out.dim() > 0 {
        // re-decide the rank with the configured tolerance
        out = kernel_subspace(&beta.beta_z(&reg.vector), cfg.tol_rank);
    }
    Ok(out)
}

/// `k = dim alpha(Delta_beta, Delta_beta)` together with the largest
/// component of those values along `S(beta)`, relative to `max |alpha|`.
pub fn k_invariant(
    pg: &PointGeometry,
    delta_beta: &Subspace,
    s_beta: &Subspace,
    tol: f64,
) -> (usize, f64) {
    let d = delta_beta.dim();
    let mut cols = DMatrix::zeros(pg.p, d * d);
    for i in 0..d {
        for j in 0..d {
            let v = pg.alpha_on(
                &delta_beta.basis.column(i).into_owned(),
                &delta_beta.basis.column(j).into_owned(),
            );
            cols.set_column(i * d + j, &v);
        }
    }
    let k = numerical_rank(&cols, tol);
    let leak = if s_beta.dim() == 0 || d == 0 {
        0.0
    } else {
        (s_beta.basis.transpose() * &cols).amax() / pg.max_alpha().max(1e-300)
    };
    (k, leak)
}

/// Integer identities relating the component dimensions.
pub fn dimension_identity_audit(r: &ClassificationReport) -> Vec<Audit> {
    let mut out = vec![
        Audit::identity(
            "dimension_identity",
            r.nu_g + r.dim_delta_beta_plus_gamma == r.dim_delta_beta + r.mu,
        ),
        Audit::identity("chern_kuiper", r.nu_g <= r.mu && r.mu <= r.nu_g + r.p),
    ];
    if r.nu_g + r.p + 1 <= r.n {
        out.push(Audit::identity(
            "rank_bounds",
            r.mu - r.nu_g.min(r.mu) <= r.dim_s_beta && r.dim_s_beta + 1 <= r.p,
        ));
    }
    out
}

/// Case assignment from the component dimensions.
pub fn classify_dims(
    n: usize,
    p: usize,
    mu: usize,
    nu_g: usize,
    dim_s: usize,
    k: usize,
) -> CaseTag {
    if mu == nu_g {
        CaseTag::TrivialEqualNullities
    } else if mu == nu_g + p {
        CaseTag::FlatExtreme
    } else if mu > nu_g && dim_s == mu - nu_g && dim_s < p {
        CaseTag::CompositionBound
    } else if dim_s + 1 == p && nu_g + p + 1 <= n {
        if k >= 1 {
            CaseTag::RankOneLK1
        } else {
            CaseTag::RankOneLK0Ruled
        }
    } else {
        CaseTag::Unclassified
    }
}

/// Full pointwise analysis.
pub fn analyze_point(
    def: &ImmersionDef,
    x: &ChartPoint,
    cfg: &AnalyzerConfig,
) -> Result<ClassificationReport> {
    let jet = lift(def, x, 2)?;
    let pg = point_geometry(&jet)?;
    analyze_geometry(&pg, x, cfg)
}

pub fn analyze_geometry(
    pg: &PointGeometry,
    x: &ChartPoint,
    cfg: &AnalyzerConfig,
) -> Result<ClassificationReport> {
    let (n, p) = (pg.n, pg.p);
    let gamma = nullity_gamma(pg, cfg.tol_rank);
    let delta_g = relative_nullity(pg, cfg.tol_rank);
    let beta = build_beta(pg, &gamma)?;
    let beta_flat = flatness_residual(&beta);
    let db = delta_beta(pg, &gamma, cfg)?;
    let s_beta = span_of(&beta);
    let (mu, nu_g) = (gamma.dim(), delta_g.dim());
    let (k, leak) = k_invariant(pg, &db, &s_beta, cfg.tol_rank);
    let sum = db.sum(&gamma);
    let ell = p - s_beta.dim();
    let case = classify_dims(n, p, mu, nu_g, s_beta.dim(), k);
    let mut r = ClassificationReport {
        x: x.clone(),
        n,
        p,
        mu,
        nu_g,
        dim_delta_beta: db.dim(),
        dim_s_beta: s_beta.dim(),
        dim_delta_beta_plus_gamma: sum.dim(),
        ell,
        k,
        case,
        codim2: None,
        nu_bound: nu_g + p + 1 <= n,
        audits: Vec::new(),
    };
    let mut audits = dimension_identity_audit(&r);
    audits.push(Audit::residual("beta_flatness", beta_flat, cfg.tol_flat));
    audits.push(Audit::residual(
        "curvature_symmetries",
        pg.curvature_symmetry_residual(),
        1e-10,
    ));
    audits.push(Audit::residual(
        "delta_g_in_gamma",
        gamma.containment_residual(&delta_g),
        1e-8,
    ));
    audits.push(Audit::residual(
        "delta_g_eq_delta_beta_cap_gamma",
        db.intersection(&gamma).distance(&delta_g),
        1e-8,
    ));
    audits.push(Audit::residual("alpha_delta_beta_perp_s_beta", leak, 1e-8));
    audits.push(Audit::identity("lemma_moore_bound", db.dim() + p >= n));
    if ell >= 1 {
        audits.push(Audit::identity("k_le_ell", k <= ell));
    }
    if case == CaseTag::FlatExtreme {
        let scale = pg.max_alpha().powi(2).max(1.0);
        audits.push(Audit::residual(
            "flat_extreme_curvature",
            pg.max_curvature() / scale,
            1e-8,
        ));
        audits.push(Audit::identity("flat_extreme_mu_eq_n", mu == n));
    }
    if p == 2 {
        r.codim2 = match case {
            CaseTag::CompositionBound => Some("i".into()),
            CaseTag::FlatExtreme => Some("ii".into()),
            _ => None,
        };
    }
    r.audits = audits;
    Ok(r)
}

/// Regular sampling grid of a chart box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub counts: Vec<usize>,
    pub domain: Vec<[f64; 2]>,
}

impl Grid {
    pub fn new(counts: Vec<usize>, domain: Vec<[f64; 2]>) -> Result<Self> {
        if counts.len() != domain.len() || counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!(
                "grid {counts:?} does not match a {}-dimensional box",
                domain.len()
            )));
        }
        if domain
            .iter()
            .any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidParameter("grid box must be finite".into()));
        }
        Ok(Self { counts, domain })
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of flat index `idx`, last axis fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        for (slot, &c) in out.iter_mut().zip(&self.counts).rev() {
            *slot = idx % c;
            idx /= c;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, idx: usize) -> ChartPoint {
        let m = self.multi_index(idx);
        ChartPoint::new(
            m.iter()
                .zip(&self.counts)
                .zip(&self.domain)
                .map(|((&i, &c), [lo, hi])| {
                    if c == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (c - 1) as f64
                    }
                })
                .collect(),
        )
    }

    /// Flat indices of the axis neighbours of `idx`.
    pub fn neighbours(&self, idx: usize) -> Vec<usize> {
        let m = self.multi_index(idx);
        let mut out = Vec::new();
        for axis in 0..m.len() {
            for step in [-1i64, 1] {
                let v = m[axis] as i64 + step;
                if v >= 0 && (v as usize) < self.counts[axis] {
                    let mut nb = m.clone();
                    nb[axis] = v as usize;
                    out.push(self.flat_index(&nb));
                }
            }
        }
        out
    }
}

/// Analyzes every grid point in parallel, in grid order, and marks points
/// whose dimension signature differs from an axis neighbour.
pub fn analyze_grid(
    def: &ImmersionDef,
    grid: &Grid,
    cfg: &AnalyzerConfig,
) -> Result<Vec<ClassificationReport>> {
    let mut reports = (0..grid.len())
        .into_par_iter()
        .map(|i| analyze_point(def, &grid.point(i), cfg))
        .collect::<Result<Vec<_>>>()?;
    mark_stratum_boundaries(grid, &mut reports);
    Ok(reports)
}

pub fn mark_stratum_boundaries(grid: &Grid, reports: &mut [ClassificationReport]) {
    let sigs: Vec<_> = reports.iter().map(|r| r.signature()).collect();
    for (i, r) in reports.iter_mut().enumerate() {
        if grid.neighbours(i).iter().any(|&j| sigs[j] != sigs[i]) {
            r.case = CaseTag::StratumBoundary;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;

    fn report(name: &str) -> ClassificationReport {
        let def = catalog::by_name(name).unwrap();
        analyze_point(&def, &def.center(), &AnalyzerConfig::default()).unwrap()
    }

    #[test]
    fn sphere_is_trivial() {
        let r = report("sphere_2");
        assert_eq!((r.mu, r.nu_g), (0, 0));
        assert_eq!(r.case, CaseTag::TrivialEqualNullities);
        assert!(r.all_pass());
    }

    #[test]
    fn clifford_torus_is_flat_extreme() {
        let r = report("clifford_torus");
        assert_eq!((r.mu, r.nu_g, r.p), (2, 0, 2));
        assert_eq!(r.case, CaseTag::FlatExtreme);
        assert_eq!(r.codim2.as_deref(), Some("ii"));
        assert!(r.audit("flat_extreme_curvature").unwrap().pass);
    }

    #[test]
    fn bent_product_is_composition() {
        let r = report("compo_s2xR_bend");
        assert_eq!((r.mu, r.nu_g, r.dim_s_beta, r.ell, r.k), (1, 0, 1, 1, 1));
        assert_eq!(r.case, CaseTag::CompositionBound);
        assert_eq!(r.codim2.as_deref(), Some("i"));
        assert!(r.all_pass());
    }

    #[test]
    fn corrupted_report_fails_chern_kuiper() {
        let mut r = report("compo_s2xR_bend");
        r.mu = 3;
        r.nu_g = 0;
        r.p = 2;
        let audits = dimension_identity_audit(&r);
        let ck = audits.iter().find(|a| a.name == "chern_kuiper").unwrap();
        assert!(!ck.pass);
    }

    #[test]
    fn case_table() {
        assert_eq!(
            classify_dims(3, 2, 3, 3, 0, 0),
            CaseTag::TrivialEqualNullities
        );
        assert_eq!(classify_dims(2, 2, 2, 0, 2, 0), CaseTag::FlatExtreme);
        assert_eq!(classify_dims(3, 2, 1, 0, 1, 1), CaseTag::CompositionBound);
        assert_eq!(classify_dims(5, 3, 2, 0, 2, 1), CaseTag::CompositionBound);
        assert_eq!(classify_dims(5, 3, 2, 1, 2, 1), CaseTag::RankOneLK1);
        assert_eq!(classify_dims(5, 4, 1, 0, 3, 0), CaseTag::RankOneLK0Ruled);
        assert_eq!(classify_dims(4, 3, 2, 1, 2, 1), CaseTag::Unclassified);
    }

    #[test]
    fn grid_points_include_endpoints() {
        let g = Grid::new(vec![3, 1], vec![[0.0, 1.0], [2.0, 4.0]]).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.point(2).coords, vec![1.0, 3.0]);
        assert!(Grid::new(vec![2], vec![[0.0, 1.0], [0.0, 1.0]]).is_err());
        assert!(Grid::new(vec![2], vec![[0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn boundary_marking() {
        let g = Grid::new(vec![3], vec![[0.0, 1.0]]).unwrap();
        let base = report("sphere_2");
        let mut reps = vec![base.clone(), base.clone(), base];
        reps[2].mu = 1;
        mark_stratum_boundaries(&g, &mut reps);
        let cases: Vec<_> = reps.iter().map(|r| r.case).collect();
        assert_eq!(
            cases,
            vec![
                CaseTag::TrivialEqualNullities,
                CaseTag::StratumBoundary,
                CaseTag::StratumBoundary
            ]
        );
    }

    proptest! {
        #[test]
        fn grid_index_round_trip(counts in proptest::collection::vec(1usize..5, 1..4), seed in 0usize..1000) {
            let domain = vec![[0.0, 1.0]; counts.len()];
            let g = Grid::new(counts, domain).unwrap();
            let idx = seed % g.len();
            prop_assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
            for nb in g.neighbours(idx) {
                prop_assert!(g.neighbours(nb).contains(&idx));
            }
        }

        #[test]
        fn classification_is_total_and_consistent(n in 1usize..7, p in 1usize..4, mu in 0usize..7, nu in 0usize..7, s in 0usize..4, k in 0usize..3) {
            let case = classify_dims(n, p, mu, nu, s, k);
            if case == CaseTag::FlatExtreme {
                prop_assert_eq!(mu, nu + p);
            }
            if case == CaseTag::CompositionBound {
                prop_assert!(s < p && mu - nu == s);
            }
        }
    }
}
