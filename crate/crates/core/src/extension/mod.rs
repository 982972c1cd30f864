//! The extension tensor `phi` on `TM + L`, its curvature and nullities, and
//! the ruled extension built from it.
//!
//! For a normal subbundle `L` with complement `S = L^perp` inside the normal
//! bundle, `phi(X, v) = (nabla~_X v)_S` for sections `v` of `TM + L`. With
//! `P_S` the ambient projector field onto `S`, `phi(d_a, v) = -P_S d_a(P_S) v`.

mod ruled;

pub use ruled::{
    build_ruled_extension, ruled_case_check, verify_extension, verify_extension_over, BaseData,
    ExtensionConfig, ExtensionPoint, RuledExtensionSample,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analyzer::Audit;
use crate::catalog::ImmersionDef;
use crate::error::{Error, Result};
use crate::fields::{FieldGeometry, LChoice, LProjectors};
use crate::geometry::{point_geometry, PointGeometry};
use crate::jets::{lift_to_order, ChartPoint};
use crate::linalg::{kernel_subspace, Subspace};
use crate::series::MatSeries;

pub const CODAZZI_TOL: f64 = 1e-8;
pub const BIANCHI1_TOL: f64 = 1e-10;
pub const BIANCHI2_TOL: f64 = 1e-7;

/// `phi` in orthonormal coordinates: the first `n` frame columns span `TM`,
/// the remaining `ell` span `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTensor {
    pub n: usize,
    pub ell: usize,
    /// Ambient frame of `TM + L`, `m x (n + ell)`.
    pub frame: DMatrix<f64>,
    /// `values[i * (n + ell) + v]` is the ambient vector `phi(e_i, b_v)`.
    pub values: Vec<DVector<f64>>,
}

impl PhiTensor {
    pub fn dim(&self) -> usize {
        self.n + self.ell
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn value(&self, i: usize, v: usize) -> &DVector<f64> {
        &self.values[i * self.dim() + v]
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Zero tensor on a given frame.
    pub fn zero(n: usize, frame: DMatrix<f64>) -> Self {
        let dim = frame.ncols();
        let m = frame.nrows();
        Self {
            n,
            ell: dim - n,
            frame,
            values: vec![DVector::zeros(m); n * dim],
        }
    }
}

/// `R_phi(X, Y, v, w) = <phi(X, w), phi(Y, v)> - <phi(X, v), phi(Y, w)>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurvature {
    pub n: usize,
    pub dim: usize,
    /// Flat index `((x n + y) dim + v) dim + w`.
    pub values: Vec<f64>,
}

impl PhiCurvature {
    pub fn get(&self, x: usize, y: usize, v: usize, w: usize) -> f64 {
        self.values[((x * self.n + y) * self.dim + v) * self.dim + w]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

pub fn curvature_of_phi(phi: &PhiTensor) -> PhiCurvature {
    let (n, dim) = (phi.n, phi.dim());
    let mut values = Vec::with_capacity(n * n * dim * dim);
    for x in 0..n {
        for y in 0..n {
            for v in 0..dim {
                for w in 0..dim {
                    values.push(
                        phi.value(x, w).dot(phi.value(y, v)) - phi.value(x, v).dot(phi.value(y, w)),
                    );
                }
            }
        }
    }
    PhiCurvature { n, dim, values }
}

/// Cyclic sum over the three tangent slots, relative to the size of `R_phi`.
pub fn bianchi1_residual(r: &PhiCurvature) -> f64 {
    let n = r.n;
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..r.dim {
                    let s = r.get(x, y, z, w) + r.get(y, z, x, w) + r.get(z, x, y, w);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst / r.max_abs().max(1.0)
}

/// Everything needed to evaluate `phi` and its covariant derivatives at a point.
#[derive(Debug, Clone)]
pub struct PhiContext {
    pub x: ChartPoint,
    pub geometry: PointGeometry,
    pub fields: FieldGeometry,
    pub l: LProjectors,
    pub tensor: PhiTensor,
    /// `Phi_a = -P_S d_a P_S`, one per chart direction.
    phi_chart: Vec<MatSeries>,
    dps0: Vec<DMatrix<f64>>,
}

/// Builds `phi` at `x`. `order` is the series order of the fields (at least 1;
/// 2 is needed for the Codazzi and Bianchi audits).
pub fn phi_context(
    def: &ImmersionDef,
    x: &ChartPoint,
    choice: &LChoice,
    order: usize,
    tol: f64,
) -> Result<PhiContext> {
    if order == 0 {
        return Err(Error::InvalidOrder(order));
    }
    let jet = lift_to_order(def, x, order + 2)?;
    let geometry = point_geometry(&jet.truncate(2))?;
    let fields = FieldGeometry::from_jet(&jet, order, tol)?;
    let l = fields.l_projectors(choice, tol)?;
    build_phi(x, geometry, fields, l)
}

pub fn build_phi(
    x: &ChartPoint,
    geometry: PointGeometry,
    fields: FieldGeometry,
    l: LProjectors,
) -> Result<PhiContext> {
    if l.ell == 0 {
        return Err(Error::InvalidParameter("L has rank 0".into()));
    }
    let (n, m) = (fields.n, fields.m);
    let d = fields.order;
    let ps = &l.p_s;
    let ps_low = ps.truncate(d - 1);
    let phi_chart: Vec<MatSeries> = (0..n)
        .map(|a| ps_low.mul(&ps.derivative(a)).scale(-1.0))
        .collect();
    let dps0: Vec<DMatrix<f64>> = (0..n).map(|a| ps.gradient(a).clone()).collect();

    let l_basis = crate::fields::dominant_basis(l.p_l.value());
    let mut frame = DMatrix::zeros(m, n + l.ell);
    frame.columns_mut(0, n).copy_from(&geometry.tangent_frame);
    frame.columns_mut(n, l.ell).copy_from(&l_basis);

    let c = &geometry.chart_frame;
    let mut values = Vec::with_capacity(n * (n + l.ell));
    for i in 0..n {
        let mut op = DMatrix::zeros(m, m);
        for a in 0..n {
            op += phi_chart[a].value() * c[(a, i)];
        }
        for v in 0..n + l.ell {
            values.push(&op * frame.column(v));
        }
    }
    let tensor = PhiTensor {
        n,
        ell: l.ell,
        frame,
        values,
    };
    Ok(PhiContext {
        x: x.clone(),
        geometry,
        fields,
        l,
        tensor,
        phi_chart,
        dps0,
    })
}

impl PhiContext {
    pub fn n(&self) -> usize {
        self.fields.n
    }

    /// `phi(e_i, e_j)` must equal `P_S alpha(e_i, e_j)`, and all values must
    /// be orthogonal to `L`.
    pub fn consistency_residual(&self) -> f64 {
        let n = self.n();
        let ps0 = self.l.p_s.value();
        let pl0 = self.l.p_l.value();
        let scale = self.geometry.max_alpha().max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = ps0 * self.geometry.normal_ambient(&self.geometry.alpha_vec(i, j));
                worst = worst.max((self.tensor.value(i, j) - target).norm());
            }
            for v in 0..self.tensor.dim() {
                worst = worst.max((pl0 * self.tensor.value(i, v)).norm());
            }
        }
        worst / scale
    }

    fn phi0(&self, a: usize, v: &DVector<f64>) -> DVector<f64> {
        self.phi_chart[a].value() * v
    }

    /// Chart covariant derivative `nabla_v` of the section `(I - P_S) v0` at the base point.
    fn nabla_section(&self, s: usize, v0: &DVector<f64>) -> DVector<f64> {
        let ps0 = self.l.p_s.value();
        let m = ps0.nrows();
        (DMatrix::identity(m, m) - ps0) * (-(&self.dps0[s] * v0))
    }

    /// Largest antisymmetric part of `(nabla_{d_i} phi)(d_j, v)` over chart
    /// directions and frame vectors `v`, relative to its size.
    pub fn codazzi_residual(&self) -> Result<f64> {
        if self.fields.order < 2 {
            return Err(Error::InvalidOrder(self.fields.order));
        }
        let n = self.n();
        let ps0 = self.l.p_s.value();
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for v in 0..self.tensor.dim() {
            let v0 = self.tensor.frame.column(v).into_owned();
            let d: Vec<Vec<DVector<f64>>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let mut out = ps0 * (self.phi_chart[j].gradient(i) * &v0);
                            for k in 0..n {
                                out -= self.phi0(k, &v0) * self.fields.christoffel[k][(i, j)];
                            }
                            out - self.phi0(j, &self.nabla_section(i, &v0))
                        })
                        .collect()
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    size = size.max(d[i][j].norm());
                    diff = diff.max((&d[i][j] - &d[j][i]).norm());
                }
            }
        }
        Ok(diff / size.max(1.0))
    }

    fn r0(&self, a: &DVector<f64>, b: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        // chart vectors a, b; ambient v, w
        let apply = |c: &DVector<f64>, u: &DVector<f64>| {
            let mut out = DVector::zeros(u.len());
            for (k, ck) in c.iter().enumerate() {
                if *ck != 0.0 {
                    out += self.phi0(k, u) * *ck;
                }
            }
            out
        };
        apply(a, w).dot(&apply(b, v)) - apply(a, v).dot(&apply(b, w))
    }

    /// Cyclic sum of `(nabla_s R_phi)(t, u, v, w)` over chart directions, for
    /// all frame vectors `v, w`, relative to the size of the terms.
    pub fn bianchi2_residual(&self) -> Result<f64> {
        if self.fields.order < 2 {
            return Err(Error::InvalidOrder(self.fields.order));
        }
        let n = self.n();
        let dim = self.tensor.dim();
        let e = |i: usize| {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v
        };
        let gamma = |s: usize, t: usize| {
            DVector::from_iterator(n, (0..n).map(|k| self.fields.christoffel[k][(s, t)]))
        };
        let nabla_r = |s: usize, t: usize, u: usize, v0: &DVector<f64>, w0: &DVector<f64>| {
            let dphi = |a: usize, x: &DVector<f64>| self.phi_chart[a].gradient(s) * x;
            let deriv = dphi(t, w0).dot(&self.phi0(u, v0)) + self.phi0(t, w0).dot(&dphi(u, v0))
                - dphi(t, v0).dot(&self.phi0(u, w0))
                - self.phi0(t, v0).dot(&dphi(u, w0));
            deriv
                - self.r0(&gamma(s, t), &e(u), v0, w0)
                - self.r0(&e(t), &gamma(s, u), v0, w0)
                - self.r0(&e(t), &e(u), &self.nabla_section(s, v0), w0)
                - self.r0(&e(t), &e(u), v0, &self.nabla_section(s, w0))
        };
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for v in 0..dim {
            let v0 = self.tensor.frame.column(v).into_owned();
            for w in 0..dim {
                let w0 = self.tensor.frame.column(w).into_owned();
                for s in 0..n {
                    for t in 0..n {
                        for u in 0..n {
                            let a = nabla_r(s, t, u, &v0, &w0);
                            size = size.max(a.abs());
                            let cyc = a + nabla_r(t, u, s, &v0, &w0) + nabla_r(u, s, t, &v0, &w0);
                            worst = worst.max(cyc.abs());
                        }
                    }
                }
            }
        }
        Ok(worst / size.max(1.0))
    }
}

/// The four nullity subspaces of `phi`, in orthonormal coordinates. Left
/// subspaces live in `TM` (dimension `n`), right ones in `TM + L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiNullities {
    pub delta_left: Subspace,
    pub delta_right: Subspace,
    pub gamma_left: Subspace,
    pub gamma_right: Subspace,
    pub audits: Vec<Audit>,
}

fn embed_tangent(s: &Subspace, dim: usize) -> Subspace {
    let mut basis = DMatrix::zeros(dim, s.dim());
    basis.rows_mut(0, s.ambient_dim()).copy_from(&s.basis);
    Subspace { basis, tol: s.tol }
}

pub fn phi_nullities(phi: &PhiTensor, r: &PhiCurvature, tol: f64) -> PhiNullities {
    let (n, dim, m) = (phi.n, phi.dim(), phi.ambient_dim());
    let left = DMatrix::from_fn(dim * m, n, |row, x| phi.value(x, row / m)[row % m]);
    let right = DMatrix::from_fn(n * m, dim, |row, v| phi.value(row / m, v)[row % m]);
    let r_left = DMatrix::from_fn(n * dim * dim, n, |row, x| {
        r.get(x, row / (dim * dim), (row / dim) % dim, row % dim)
    });
    let r_right = DMatrix::from_fn(n * n * dim, dim, |row, w| {
        r.get(row / (n * dim), (row / dim) % n, row % dim, w)
    });
    let delta_left = kernel_subspace(&left, tol);
    let delta_right = kernel_subspace(&right, tol);
    let gamma_left = kernel_subspace(&r_left, tol);
    let gamma_right = kernel_subspace(&r_right, tol);

    let tangent = embed_tangent(&Subspace::full(n, tol), dim);
    let dl = embed_tangent(&delta_left, dim);
    let gl = embed_tangent(&gamma_left, dim);
    let audits = vec![
        Audit::residual(
            "delta_left_in_delta_right",
            delta_right.containment_residual(&dl),
            1e-8,
        ),
        Audit::residual(
            "delta_left_eq_delta_right_cap_tm",
            delta_right.intersection(&tangent).distance(&dl),
            1e-8,
        ),
        Audit::residual(
            "delta_left_in_gamma_left",
            gamma_left.containment_residual(&delta_left),
            1e-8,
        ),
        Audit::residual(
            "gamma_left_in_gamma_right",
            gamma_right.containment_residual(&gl),
            1e-8,
        ),
    ];
    PhiNullities {
        delta_left,
        delta_right,
        gamma_left,
        gamma_right,
        audits,
    }
}

/// `Lambda = Delta_phi^r ∩ (Delta_phi^l)^perp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaBundle {
    /// In the coordinates of `TM + L`.
    pub subspace: Subspace,
    /// Ambient basis of `Lambda`.
    pub ambient: DMatrix<f64>,
    pub ell: usize,
    pub warning: Option<String>,
}

impl LambdaBundle {
    pub fn rank(&self) -> usize {
        self.subspace.dim()
    }
}

pub fn lambda_bundle(phi: &PhiTensor, nullities: &PhiNullities) -> LambdaBundle {
    let dim = phi.dim();
    let dl = embed_tangent(&nullities.delta_left, dim);
    let subspace = nullities.delta_right.intersection(&dl.complement());
    let ambient = &phi.frame * &subspace.basis;
    let warning = (subspace.dim() != phi.ell).then(|| {
        format!(
            "rank of Lambda is {} but L has rank {}",
            subspace.dim(),
            phi.ell
        )
    });
    LambdaBundle {
        subspace,
        ambient,
        ell: phi.ell,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{delta_beta, AnalyzerConfig};
    use crate::catalog;
    use crate::geometry::nullity_gamma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_tensor_has_full_nullities() {
        let frame = DMatrix::identity(4, 3);
        let phi = PhiTensor::zero(2, frame);
        let r = curvature_of_phi(&phi);
        let nl = phi_nullities(&phi, &r, 1e-8);
        assert_eq!(nl.delta_left.dim(), 2);
        assert_eq!(nl.delta_right.dim(), 3);
        assert!(nl.audits.iter().all(|a| a.pass));
        assert_eq!(lambda_bundle(&phi, &nl).rank(), 1);
    }

    #[test]
    fn composition_phi_is_flat_and_codazzi() {
        let def = catalog::by_name("compo_s2xR_bend").unwrap();
        let ctx =
            phi_context(&def, &def.center(), &LChoice::ComplementOfBetaSpan, 2, 1e-8).unwrap();
        assert_eq!(ctx.tensor.ell, 1);
        assert!(ctx.consistency_residual() < 1e-10);
        let r = curvature_of_phi(&ctx.tensor);
        assert!(r.max_abs() < 1e-8);
        assert!(ctx.codazzi_residual().unwrap() < CODAZZI_TOL);
        assert!(ctx.bianchi2_residual().unwrap() < BIANCHI2_TOL);
        let nl = phi_nullities(&ctx.tensor, &r, 1e-8);
        assert_eq!(nl.delta_right.dim(), nl.delta_left.dim() + 1);
        assert_eq!(lambda_bundle(&ctx.tensor, &nl).warning, None);

        // the left nullity of phi is Delta_beta
        let cfg = AnalyzerConfig::default();
        let gamma = nullity_gamma(&ctx.geometry, cfg.tol_rank);
        let db = delta_beta(&ctx.geometry, &gamma, &cfg).unwrap();
        assert!(nl.delta_left.distance(&db) < 1e-8);
    }

    #[test]
    fn noisy_phi_loses_lambda() {
        let def = catalog::by_name("compo_s2xR_bend").unwrap();
        let ctx =
            phi_context(&def, &def.center(), &LChoice::ComplementOfBetaSpan, 1, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut phi = ctx.tensor.clone();
        for v in phi.values.iter_mut() {
            *v += DVector::from_fn(v.len(), |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
        }
        let r = curvature_of_phi(&phi);
        let lb = lambda_bundle(&phi, &phi_nullities(&phi, &r, 1e-8));
        assert_eq!(lb.rank(), 0);
        assert!(lb.warning.is_some());
    }

    #[test]
    fn affine_phi_vanishes() {
        let def = catalog::by_name("affine_3_2").unwrap();
        let ctx = phi_context(&def, &def.center(), &LChoice::FullNormal, 2, 1e-8).unwrap();
        assert_eq!(ctx.tensor.max_norm(), 0.0);
        assert_eq!(ctx.codazzi_residual().unwrap(), 0.0);
        assert_eq!(ctx.bianchi2_residual().unwrap(), 0.0);
        let nl = phi_nullities(&ctx.tensor, &curvature_of_phi(&ctx.tensor), 1e-8);
        assert_eq!(nl.gamma_right.dim(), 5);
    }

    #[test]
    fn rank_zero_l_is_rejected() {
        let def = catalog::by_name("clifford_torus").unwrap();
        let err = phi_context(&def, &def.center(), &LChoice::ComplementOfBetaSpan, 1, 1e-8);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
