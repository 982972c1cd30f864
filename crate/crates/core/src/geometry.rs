//! First and second fundamental data of an immersion at a point.
//!
//! All tensors are expressed in the orthonormal tangent frame obtained from
//! the QR factorization of the Jacobian (positive diagonal) and in a normal
//! frame completed from the standard basis. Curvature is assembled from the
//! second fundamental form by the Gauss equation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet3;
use crate::linalg::{kernel_subspace, numerical_rank, Subspace};

/// Relative threshold for the immersion (full column rank) test.
const IMMERSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    pub n: usize,
    pub p: usize,
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// `J^T J` in chart coordinates.
    pub metric: DMatrix<f64>,
    /// Orthonormal tangent frame, `ambient x n`.
    pub tangent_frame: DMatrix<f64>,
    /// Chart components of the tangent frame: `tangent_frame = J * chart_frame`.
    pub chart_frame: DMatrix<f64>,
    /// Orthonormal normal frame, `ambient x p`.
    pub normal_frame: DMatrix<f64>,
    /// `alpha[k][(i, j)] = <alpha(e_i, e_j), nu_k>`.
    pub alpha: Vec<DMatrix<f64>>,
    /// `R(e_i, e_j, e_k, e_l)` at flat index `((i n + j) n + k) n + l`.
    pub curvature: Vec<f64>,
}

pub fn point_geometry(j: &Jet3) -> Result<PointGeometry> {
    if j.order() < 2 {
        return Err(Error::InvalidOrder(j.order()));
    }
    let n = j.dim_domain();
    let m = j.dim_ambient();
    let jac = j.jacobian();
    let rank = numerical_rank(&jac, IMMERSION_TOL);
    if rank < n {
        return Err(Error::NotAnImmersion { rank, expected: n });
    }
    let qr = jac.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            let col = -q.column(i);
            q.set_column(i, &col);
            let row = -r.row(i);
            r.set_row(i, &row);
        }
    }
    let chart_frame = r
        .clone()
        .try_inverse()
        .ok_or(Error::NotAnImmersion { rank, expected: n })?;
    let normal_frame = complete_frame(&q, m - n);

    let hess: Vec<DVector<f64>> = (0..n * n)
        .map(|ab| j.second_partial(ab / n, ab % n))
        .collect();
    let mut alpha = vec![DMatrix::zeros(n, n); m - n];
    for i in 0..n {
        for jj in i..n {
            let mut v = DVector::zeros(m);
            for a in 0..n {
                for b in 0..n {
                    let c = chart_frame[(a, i)] * chart_frame[(b, jj)];
                    if c != 0.0 {
                        v.axpy(c, &hess[a * n + b], 1.0);
                    }
                }
            }
            let comps = normal_frame.transpose() * v;
            for (k, ak) in alpha.iter_mut().enumerate() {
                ak[(i, jj)] = comps[k];
                ak[(jj, i)] = comps[k];
            }
        }
    }
    let mut pg = PointGeometry {
        n,
        p: m - n,
        value: j.value(),
        metric: jac.transpose() * &jac,
        jacobian: jac,
        tangent_frame: q,
        chart_frame,
        normal_frame,
        alpha,
        curvature: Vec::new(),
    };
    pg.curvature = gauss_curvature(&pg.alpha, n);
    Ok(pg)
}

/// Orthonormal complement of the columns of `q`, built by pivoted
/// Gram-Schmidt over the standard basis.
fn complete_frame(q: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let m = q.nrows();
    let mut frame: Vec<DVector<f64>> = (0..q.ncols()).map(|i| q.column(i).into_owned()).collect();
    let mut out = DMatrix::zeros(m, count);
    let mut used = vec![false; m];
    for k in 0..count {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (e, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut v = DVector::zeros(m);
            v[e] = 1.0;
            for _ in 0..2 {
                for f in &frame {
                    let d = f.dot(&v);
                    v.axpy(-d, f, 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |b| norm > b.2 + 1e-12) {
                best = Some((e, v, norm));
            }
        }
        let (e, v, norm) = best.expect("ambient dimension exhausted");
        used[e] = true;
        let v = v / norm;
        out.set_column(k, &v);
        frame.push(v);
    }
    out
}

fn gauss_curvature(alpha: &[DMatrix<f64>], n: usize) -> Vec<f64> {
    let mut r = vec![0.0; n * n * n * n];
    let ip = |a: (usize, usize), b: (usize, usize)| -> f64 {
        alpha.iter().map(|ak| ak[a] * ak[b]).sum()
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    r[((i * n + j) * n + k) * n + l] = ip((i, l), (j, k)) - ip((i, k), (j, l));
                }
            }
        }
    }
    r
}

impl PointGeometry {
    pub fn ambient_dim(&self) -> usize {
        self.n + self.p
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.curvature[((i * n + j) * n + k) * n + l]
    }

    /// `alpha(e_i, e_j)` in normal-frame components.
    pub fn alpha_vec(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.p, self.alpha.iter().map(|a| a[(i, j)]))
    }

    /// `alpha(X, Y)` in normal-frame components for frame-coordinate vectors.
    pub fn alpha_on(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.p, self.alpha.iter().map(|a| x.dot(&(a * y))))
    }

    pub fn max_alpha(&self) -> f64 {
        self.alpha.iter().map(|a| a.amax()).fold(0.0, f64::max)
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Largest violation of the algebraic curvature symmetries and of the
    /// first Bianchi identity, relative to the largest curvature component.
    pub fn curvature_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.r(i, j, k, l);
                        worst = worst
                            .max((v + self.r(j, i, k, l)).abs())
                            .max((v - self.r(k, l, i, j)).abs())
                            .max((v + self.r(j, k, i, l) + self.r(k, i, j, l)).abs());
                    }
                }
            }
        }
        let scale = self.max_curvature();
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Matrix of `X -> R(X, ., ., .)`, one column per frame direction.
    pub fn curvature_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n * n * n, n, |row, i| self.curvature[i * n * n * n + row])
    }

    /// Matrix of `X -> alpha(X, .)`, one column per frame direction.
    pub fn alpha_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(self.p * n, n, |row, i| self.alpha[row / n][(i, row % n)])
    }

    /// Geometry expressed in the rotated tangent frame `e'_i = sum_a q[(a, i)] e_a`.
    pub fn rotate_tangent(&self, q: &DMatrix<f64>) -> PointGeometry {
        let mut out = self.clone();
        out.tangent_frame = &self.tangent_frame * q;
        out.chart_frame = &self.chart_frame * q;
        out.alpha = self.alpha.iter().map(|a| q.transpose() * a * q).collect();
        out.curvature = gauss_curvature(&out.alpha, self.n);
        out
    }

    /// Ambient vector of a frame-coordinate tangent vector.
    pub fn tangent_ambient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.tangent_frame * v
    }

    /// Ambient vector of a normal-frame vector.
    pub fn normal_ambient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.normal_frame * v
    }
}

/// Nullity of the curvature tensor, in frame coordinates.
pub fn nullity_gamma(pg: &PointGeometry, tol: f64) -> Subspace {
    kernel_subspace(&pg.curvature_matrix(), tol)
}

/// Relative nullity (kernel of the second fundamental form), in frame coordinates.
pub fn relative_nullity(pg: &PointGeometry, tol: f64) -> Subspace {
    kernel_subspace(&pg.alpha_matrix(), tol)
}

/// Shape operator `A` with `<A X, Y> = <alpha(X, Y), normal>` for a unit
/// normal given in normal-frame components.
pub fn shape_operator(pg: &PointGeometry, normal: &DVector<f64>) -> Result<DMatrix<f64>> {
    if normal.len() != pg.p {
        return Err(Error::DimensionMismatch(format!(
            "normal has {} components, codimension is {}",
            normal.len(),
            pg.p
        )));
    }
    let norm = normal.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitNormal(norm));
    }
    let mut a = DMatrix::zeros(pg.n, pg.n);
    for (k, ak) in pg.alpha.iter().enumerate() {
        a += ak * normal[k];
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Constructor, ImmersionDef};
    use crate::jets::{lift, ChartPoint};
    use crate::linalg::DEFAULT_TOL;

    fn at(def: &ImmersionDef, x: &[f64]) -> PointGeometry {
        point_geometry(&lift(def, &ChartPoint::new(x.to_vec()), 2).unwrap()).unwrap()
    }

    #[test]
    fn affine_is_totally_geodesic() {
        let def = ImmersionDef::unbounded("a", Constructor::Affine { n: 3, p: 2 });
        let pg = at(&def, &[0.2, -0.1, 0.3]);
        assert_eq!(pg.max_alpha(), 0.0);
        assert_eq!(pg.max_curvature(), 0.0);
        assert_eq!(relative_nullity(&pg, DEFAULT_TOL).dim(), 3);
        let s = shape_operator(&pg, &DVector::from_vec(vec![0.6, 0.8])).unwrap();
        assert_eq!(s.amax(), 0.0);
    }

    #[test]
    fn cylinder_has_one_alpha_entry() {
        let def = ImmersionDef::unbounded("c", catalog::unit_cylinder());
        let pg = at(&def, &[0.7, 0.2]);
        assert!((pg.alpha[0][(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!(pg.alpha[0][(0, 1)].abs() < 1e-15 && pg.alpha[0][(1, 1)].abs() < 1e-15);
        assert!(pg.max_curvature() < 1e-15);
        assert_eq!(relative_nullity(&pg, DEFAULT_TOL).dim(), 1);
        let a = shape_operator(&pg, &DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(crate::linalg::numerical_rank(&a, DEFAULT_TOL), 1);
    }

    #[test]
    fn non_unit_normal_rejected() {
        let def = ImmersionDef::unbounded("c", catalog::unit_cylinder());
        let pg = at(&def, &[0.0, 0.0]);
        assert!(matches!(
            shape_operator(&pg, &DVector::from_vec(vec![2.0])),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn sphere_outward_normal_gives_minus_identity() {
        let def = catalog::by_name("sphere_2").unwrap();
        let pg = at(&def, &[1.1, 0.4]);
        // outward normal is the position vector
        let xi = pg.normal_frame.transpose() * &pg.value;
        let a = shape_operator(&pg, &xi).unwrap();
        assert!((a + DMatrix::identity(2, 2)).amax() < 1e-13);
        assert_eq!(nullity_gamma(&pg, DEFAULT_TOL).dim(), 0);
    }

    #[test]
    fn frames_are_orthonormal() {
        let def = catalog::by_name("compo_s2xR_bend").unwrap();
        let pg = at(&def, &def.center().coords);
        let mut f = DMatrix::zeros(5, 5);
        f.columns_mut(0, 3).copy_from(&pg.tangent_frame);
        f.columns_mut(3, 2).copy_from(&pg.normal_frame);
        assert!((f.transpose() * &f - DMatrix::identity(5, 5)).amax() < 1e-10);
        assert!((&pg.jacobian * &pg.chart_frame - &pg.tangent_frame).amax() < 1e-13);
        assert!(pg.curvature_symmetry_residual() < 1e-10);
    }

    #[test]
    fn rank_deficient_jacobian() {
        let graph = ImmersionDef::unbounded(
            "graph",
            Constructor::Graph {
                n: 2,
                heights: vec![vec![catalog::Term::new(1.0, &[2, 0])]],
            },
        );
        let j = lift(&graph, &ChartPoint::new(vec![0.0, 0.0]), 2).unwrap();
        let squashed = Jet3::from_components(vec![
            j.components()[0].clone(),
            j.components()[0].clone(),
            j.components()[2].clone(),
        ])
        .unwrap();
        assert!(matches!(
            point_geometry(&squashed),
            Err(Error::NotAnImmersion {
                rank: 1,
                expected: 2
            })
        ));
    }
}
