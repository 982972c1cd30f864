//! Series expansions of the geometric fields of an immersion around a point.
//!
//! Everything here is expressed in chart coordinates `x0 + delta`. Quantities
//! built from `k` derivatives of the immersion are available to series order
//! `d` when the jet has order `d + k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::catalog::ImmersionDef;
use crate::error::{Error, Result};
use crate::jets::{lift_to_order, ChartPoint, Jet3};
use crate::series::{kernel_projector, range_projector, MatSeries};

/// Choice of the normal subbundle `L` used to build the extension tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LChoice {
    /// `L = S(beta)^perp` inside the normal bundle.
    ComplementOfBetaSpan,
    /// `L` is the whole normal bundle.
    FullNormal,
    /// `L` spanned by the normal projections of fixed ambient vectors.
    Projected { vectors: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct FieldGeometry {
    pub n: usize,
    pub m: usize,
    /// Series order `d` of second-order quantities.
    pub order: usize,
    pub value: DVector<f64>,
    /// Jacobian field, order `d + 1`.
    pub jac: MatSeries,
    /// Column `a n + b` holds `d_a d_b g`, order `d`.
    pub hess: MatSeries,
    pub metric_inv: MatSeries,
    /// Normal projector, order `d + 1`.
    pub p_n: MatSeries,
    /// Column `a n + b` holds `alpha(d_a, d_b)`, order `d`.
    pub alpha: MatSeries,
    /// `christoffel[k][(i, j)]` at the base point.
    pub christoffel: Vec<DMatrix<f64>>,
    /// Chart projector onto the nullity of the curvature.
    pub p_gamma: MatSeries,
    pub mu: usize,
}

/// Projectors describing a choice of `L`: `p_s` onto `L^perp` inside the
/// normal bundle, `p_l` onto `L`.
#[derive(Debug, Clone)]
pub struct LProjectors {
    pub p_s: MatSeries,
    pub p_l: MatSeries,
    pub ell: usize,
}

impl FieldGeometry {
    pub fn new(def: &ImmersionDef, x: &ChartPoint, order: usize, tol: f64) -> Result<Self> {
        let jet = lift_to_order(def, x, order + 2)?;
        Self::from_jet(&jet, order, tol)
    }

    pub fn from_jet(jet: &Jet3, order: usize, tol: f64) -> Result<Self> {
        if jet.order() != order + 2 {
            return Err(Error::InvalidOrder(jet.order()));
        }
        let n = jet.dim_domain();
        let m = jet.dim_ambient();
        let comps = jet.components();
        let jac_entries: Vec<_> = (0..m)
            .flat_map(|r| (0..n).map(move |a| (r, a)))
            .map(|(r, a)| comps[r].derivative(a))
            .collect();
        let jac = MatSeries::from_entries(m, n, &jac_entries);
        let mut hess_cols = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                hess_cols.push(
                    jac.derivative(b)
                        .map_coeffs(m, 1, |c| c.columns(a, 1).into_owned()),
                );
            }
        }
        let refs: Vec<&MatSeries> = hess_cols.iter().collect();
        let hess = MatSeries::hstack(&refs);
        let metric = jac.transpose().mul(&jac);
        let metric_inv = metric.inverse()?;
        let p_t = jac.mul(&metric_inv).mul(&jac.transpose());
        let p_n = MatSeries::identity(p_t.basis(), m).sub(&p_t);
        let alpha = p_n.mul(&hess);

        let j0 = jac.value();
        let ginv0 = metric_inv.value();
        let h0 = hess.value();
        let christoffel = (0..n)
            .map(|k| {
                DMatrix::from_fn(n, n, |i, j| {
                    let hij = h0.column(i * n + j);
                    (0..n).map(|l| ginv0[(k, l)] * j0.column(l).dot(&hij)).sum()
                })
            })
            .collect();

        let mut fg = Self {
            n,
            m,
            order,
            value: jet.value(),
            jac,
            hess,
            metric_inv,
            p_n,
            alpha,
            christoffel,
            p_gamma: MatSeries::zeros(jet.basis(), 0, 0),
            mu: 0,
        };
        let (p_gamma, rank) = kernel_projector(&fg.curvature_matrix(), tol);
        fg.p_gamma = p_gamma;
        fg.mu = n - rank;
        Ok(fg)
    }

    /// Series of `X -> R(X, ., ., .)` in chart coordinates, rows `(b, c, d)`.
    pub fn curvature_matrix(&self) -> MatSeries {
        let n = self.n;
        let gram = self.alpha.transpose().mul(&self.alpha);
        gram.map_coeffs(n * n * n, n, |g| {
            DMatrix::from_fn(n * n * n, n, |row, a| {
                let (b, c, d) = (row / (n * n), (row / n) % n, row % n);
                g[(a * n + d, b * n + c)] - g[(a * n + c, b * n + d)]
            })
        })
    }

    /// Columns `alpha(d_a, P_Gamma e_b)`, whose span is `S(beta)`.
    pub fn beta_columns(&self) -> MatSeries {
        let n = self.n;
        let blocks = self.p_gamma.map_coeffs(n * n, n * n, |p| {
            DMatrix::<f64>::identity(n, n).kronecker(p)
        });
        self.alpha.mul(&blocks)
    }

    /// Chart projector onto `Delta_beta` and the dimension of `Delta_beta`.
    pub fn delta_beta_projector(&self, tol: f64) -> (MatSeries, usize) {
        let n = self.n;
        let m = self.m;
        let b = self.beta_columns();
        let map = b.map_coeffs(m * n, n, |c| {
            DMatrix::from_fn(m * n, n, |row, a| c[(row / n, a * n + row % n)])
        });
        let (q, rank) = kernel_projector(&map, tol);
        (q, n - rank)
    }

    pub fn l_projectors(&self, choice: &LChoice, tol: f64) -> Result<LProjectors> {
        let p_n = self.p_n.truncate(self.order);
        let zero = MatSeries::zeros(p_n.basis(), self.m, self.m);
        Ok(match choice {
            LChoice::ComplementOfBetaSpan => {
                let (p_s, rank) = range_projector(&self.beta_columns(), tol);
                let p_l = p_n.sub(&p_s);
                LProjectors {
                    p_s,
                    p_l,
                    ell: self.m - self.n - rank,
                }
            }
            LChoice::FullNormal => LProjectors {
                p_s: zero,
                p_l: p_n,
                ell: self.m - self.n,
            },
            LChoice::Projected { vectors } => {
                if vectors.is_empty() || vectors.iter().any(|v| v.len() != self.m) {
                    return Err(Error::DimensionMismatch(format!(
                        "L generators must be non-empty vectors of R^{}",
                        self.m
                    )));
                }
                let c = DMatrix::from_fn(self.m, vectors.len(), |r, k| vectors[k][r]);
                let (p_l, ell) = range_projector(&p_n.right_mul(&c), tol);
                LProjectors {
                    p_s: p_n.sub(&p_l),
                    p_l,
                    ell,
                }
            }
        })
    }

    /// Ambient second fundamental form `alpha(u, v)` at the base point for
    /// chart vectors.
    pub fn alpha_at(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let a0 = self.alpha.value();
        let mut out = DVector::zeros(self.m);
        for a in 0..n {
            for b in 0..n {
                let w = u[a] * v[b];
                if w != 0.0 {
                    out.axpy(w, &a0.column(a * n + b), 1.0);
                }
            }
        }
        out
    }

    /// Chart Christoffel contraction `Gamma(u, v)` at the base point.
    pub fn christoffel_at(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n, self.christoffel.iter().map(|c| u.dot(&(c * v))))
    }

    /// Largest distance of `(nabla_{d_a} d_b)` from the distribution for
    /// frame fields `d_a = Q(delta) u_a` of a chart projector field `q`,
    /// measured in the ambient space. With `straight = true` the full ambient
    /// acceleration is used, which also includes `alpha(d_a, d_b)`.
    pub fn distribution_geodesic_residual(&self, q: &MatSeries, straight: bool) -> f64 {
        let frame = dominant_basis(q.value());
        let j0 = self.jac.value();
        let amb = crate::linalg::range_subspace(&(j0 * &frame), 1e-8);
        let mut worst: f64 = 0.0;
        for a in 0..frame.ncols() {
            for b in 0..frame.ncols() {
                let ua = frame.column(a).into_owned();
                let ub = frame.column(b).into_owned();
                // derivative of d_b = Q u_b along d_a
                let mut dd = DVector::zeros(self.n);
                for (s, w) in ua.iter().enumerate() {
                    dd += q.gradient(s) * &ub * *w;
                }
                let cov = dd + self.christoffel_at(&ua, &ub);
                let mut acc = j0 * cov;
                if straight {
                    acc += self.alpha_at(&ua, &ub);
                }
                worst = worst.max(amb.residual(&acc));
            }
        }
        worst
    }

    /// Largest ambient distance of the brackets `[d_a, d_b]` of frame fields
    /// `d_a = Q(delta) u_a` from the distribution.
    pub fn bracket_residual(&self, q: &MatSeries) -> f64 {
        let frame = dominant_basis(q.value());
        let j0 = self.jac.value();
        let amb = crate::linalg::range_subspace(&(j0 * &frame), 1e-8);
        let mut worst: f64 = 0.0;
        let deriv = |u: &DVector<f64>, v: &DVector<f64>| {
            let mut out = DVector::zeros(self.n);
            for (s, w) in u.iter().enumerate() {
                out += q.gradient(s) * v * *w;
            }
            out
        };
        for a in 0..frame.ncols() {
            for b in 0..a {
                let ua = frame.column(a).into_owned();
                let ub = frame.column(b).into_owned();
                let br = deriv(&ua, &ub) - deriv(&ub, &ua);
                worst = worst.max(amb.residual(&(j0 * br)));
            }
        }
        worst
    }
}

/// Orthonormal basis of the range of a projector value.
pub fn dominant_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let rank = p.trace().round().max(0.0) as usize;
    crate::series::projector_basis(p, rank)
}
