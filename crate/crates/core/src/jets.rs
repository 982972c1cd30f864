//! Jets of immersions: truncated Taylor expansions at a chart point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::catalog::ImmersionDef;
use crate::error::{Error, Result};
use crate::taylor::{MonomialBasis, Taylor, MAX_ORDER};

/// A point in the chart domain of an immersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Truncated Taylor expansion of a map `R^n -> R^(n+p)` at a point.
///
/// One [`Taylor`] polynomial per ambient coordinate, all sharing a monomial
/// basis in `dim_domain` variables. The coefficient of `x^e` is `∂^e g / e!`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet3 {
    dim_domain: usize,
    dim_ambient: usize,
    comps: Vec<Taylor>,
}

impl Jet3 {
    pub fn from_components(comps: Vec<Taylor>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::DimensionMismatch("jet without components".into()))?;
        let dim_domain = first.nvars();
        let order = first.order();
        if comps
            .iter()
            .any(|c| c.nvars() != dim_domain || c.order() != order)
        {
            return Err(Error::DimensionMismatch(
                "jet components use different bases".into(),
            ));
        }
        if dim_domain == 0 {
            return Err(Error::DimensionMismatch("empty domain".into()));
        }
        Ok(Self {
            dim_domain,
            dim_ambient: comps.len(),
            comps,
        })
    }

    pub fn dim_domain(&self) -> usize {
        self.dim_domain
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn order(&self) -> usize {
        self.comps[0].order()
    }

    pub fn components(&self) -> &[Taylor] {
        &self.comps
    }

    pub fn basis(&self) -> &std::sync::Arc<MonomialBasis> {
        self.comps[0].basis()
    }

    pub fn value(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim_ambient, self.comps.iter().map(Taylor::value))
    }

    /// `dim_ambient x dim_domain` Jacobian at the expansion point.
    pub fn jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim_ambient, self.dim_domain, |k, a| {
            self.comps[k].gradient(a)
        })
    }

    /// Ambient vector `∂²g/∂x_a∂x_b`.
    pub fn second_partial(&self, a: usize, b: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim_ambient, self.comps.iter().map(|c| c.hessian(a, b)))
    }

    /// Coefficient of the monomial `x^exp` in ambient component `comp`.
    pub fn coefficient(&self, comp: usize, exp: &[u8]) -> f64 {
        self.comps[comp].coeff(exp)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self {
            dim_domain: self.dim_domain,
            dim_ambient: self.dim_ambient,
            comps: self.comps.iter().map(|c| c.truncate(order)).collect(),
        }
    }

    /// Dense array of the `degree`-th partial derivatives of component `comp`,
    /// indexed row-major over `dim_domain^degree` multi-indices.
    pub fn dense_derivatives(&self, comp: usize, degree: usize) -> Vec<f64> {
        let n = self.dim_domain;
        let total = n.pow(degree as u32);
        let mut out = Vec::with_capacity(total);
        let mut exp = vec![0u8; n];
        for flat in 0..total {
            exp.iter_mut().for_each(|e| *e = 0);
            let mut rest = flat;
            for _ in 0..degree {
                exp[rest % n] += 1;
                rest /= n;
            }
            let factorial: f64 = exp.iter().map(|&e| factorial(e as usize)).product();
            out.push(self.comps[comp].coeff(&exp) * factorial);
        }
        out
    }

    /// Rebuilds a jet from dense derivative arrays, `dense[comp][degree]`.
    /// Only one representative per symmetric multi-index is read.
    pub fn from_dense(dim_domain: usize, order: usize, dense: &[Vec<Vec<f64>>]) -> Result<Self> {
        let basis = MonomialBasis::get(dim_domain, order);
        let comps = dense
            .iter()
            .map(|per_degree| {
                let mut coeffs = vec![0.0; basis.len()];
                for (k, c) in coeffs.iter_mut().enumerate() {
                    let exp = basis.exponent(k);
                    let degree = basis.degree(k);
                    // sorted multi-index, first variable fastest
                    let mut flat = 0usize;
                    let mut stride = 1usize;
                    for (v, &e) in exp.iter().enumerate() {
                        for _ in 0..e {
                            flat += v * stride;
                            stride *= dim_domain;
                        }
                    }
                    let factorial: f64 = exp.iter().map(|&e| factorial(e as usize)).product();
                    *c = per_degree[degree][flat] / factorial;
                }
                Taylor::from_coeffs(&basis, coeffs)
            })
            .collect();
        Self::from_components(comps)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Jet of `immersion` at `x` up to `order` (1, 2 or 3).
pub fn lift(immersion: &ImmersionDef, x: &ChartPoint, order: usize) -> Result<Jet3> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    lift_to_order(immersion, x, order)
}

/// Unchecked-order variant used by the derivative pipelines, which need the
/// extra orders to differentiate quantities that are themselves derivatives.
pub(crate) fn lift_to_order(
    immersion: &ImmersionDef,
    x: &ChartPoint,
    order: usize,
) -> Result<Jet3> {
    if order > MAX_ORDER {
        return Err(Error::InvalidOrder(order));
    }
    if x.dim() != immersion.n || !x.is_finite() {
        return Err(Error::OutOfDomain {
            name: immersion.name.clone(),
            point: x.coords.clone(),
        });
    }
    if !immersion.contains(x) {
        return Err(Error::OutOfDomain {
            name: immersion.name.clone(),
            point: x.coords.clone(),
        });
    }
    let basis = MonomialBasis::get(immersion.n, order);
    let vars: Vec<Taylor> = x
        .coords
        .iter()
        .enumerate()
        .map(|(i, &v)| Taylor::variable(&basis, i, v))
        .collect();
    let comps = immersion.constructor.eval(&vars)?;
    if comps.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("jet of `{}`", immersion.name)));
    }
    Jet3::from_components(comps)
}

/// Point evaluation of an immersion.
pub fn evaluate(immersion: &ImmersionDef, x: &ChartPoint) -> Result<DVector<f64>> {
    Ok(lift_to_order(immersion, x, 0)?.value())
}

/// Jet of `outer ∘ inner` from the jets of the two factors.
///
/// `outer` must be expanded at the image point of `inner`; the result is
/// truncated at the smaller of the two orders.
pub fn jet_compose(outer: &Jet3, inner: &Jet3) -> Result<Jet3> {
    if inner.dim_ambient != outer.dim_domain {
        return Err(Error::DimensionMismatch(format!(
            "inner jet lands in R^{} but outer jet is defined on R^{}",
            inner.dim_ambient, outer.dim_domain
        )));
    }
    let comps = outer
        .comps
        .iter()
        .map(|c| c.substitute(&inner.comps))
        .collect();
    Jet3::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Constructor, ImmersionDef};

    #[test]
    fn affine_jet() {
        let def = ImmersionDef::unbounded("plane", Constructor::Affine { n: 2, p: 1 });
        let j = lift(&def, &ChartPoint::new(vec![0.0, 0.0]), 2).unwrap();
        assert_eq!(j.value().as_slice(), &[0.0, 0.0, 0.0]);
        let jac = j.jacobian();
        assert_eq!(
            jac,
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        for k in 0..3 {
            assert!(j.dense_derivatives(k, 2).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn cylinder_cos_coefficient() {
        let def = ImmersionDef::unbounded("cyl", catalog::unit_cylinder());
        let j = lift(&def, &ChartPoint::new(vec![0.0, 0.0]), 2).unwrap();
        assert_eq!(j.coefficient(0, &[2, 0]), -0.5);
    }

    #[test]
    fn order_and_domain_errors() {
        let def = catalog::by_name("sphere_2").unwrap();
        let inside = def.center();
        assert!(matches!(
            lift(&def, &inside, 4),
            Err(Error::InvalidOrder(4))
        ));
        assert!(matches!(
            lift(&def, &inside, 0),
            Err(Error::InvalidOrder(0))
        ));
        let outside = ChartPoint::new(vec![10.0, 0.0]);
        assert!(matches!(
            lift(&def, &outside, 2),
            Err(Error::OutOfDomain { .. })
        ));
        let wrong_dim = ChartPoint::new(vec![1.0]);
        assert!(lift(&def, &wrong_dim, 2).is_err());
    }

    #[test]
    fn compose_dimension_mismatch() {
        let a = ImmersionDef::unbounded("a", Constructor::Affine { n: 2, p: 1 });
        let j = lift(&a, &ChartPoint::new(vec![0.1, 0.2]), 2).unwrap();
        assert!(matches!(
            jet_compose(&j, &j),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dense_round_trip() {
        let def = catalog::by_name("compo_s2xR_bend").unwrap();
        let j = lift(&def, &def.center(), 3).unwrap();
        let dense: Vec<Vec<Vec<f64>>> = (0..j.dim_ambient())
            .map(|k| (0..=3).map(|d| j.dense_derivatives(k, d)).collect())
            .collect();
        let back = Jet3::from_dense(j.dim_domain(), 3, &dense).unwrap();
        for (a, b) in back.components().iter().zip(j.components()) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
        // symmetric blocks
        let n = j.dim_domain();
        for k in 0..j.dim_ambient() {
            let d3 = j.dense_derivatives(k, 3);
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let v = d3[a + n * (b + n * c)];
                        assert_eq!(v, d3[b + n * (c + n * a)]);
                        assert_eq!(v, d3[c + n * (a + n * b)]);
                    }
                }
            }
        }
    }
}
