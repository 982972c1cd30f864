//! Closed catalog of immersion constructors.
//!
//! Every test subject is built from a small set of constructors and two
//! combinators ([`Constructor::Product`], [`Constructor::Compose`]). All of
//! them evaluate on [`Taylor`] values, so jets are exact.

use serde::{Deserialize, Serialize};

use crate::analyzer::CaseTag;
use crate::error::{Error, Result};
use crate::jets::ChartPoint;
use crate::taylor::Taylor;

/// Plane curves available to [`Constructor::Cylinder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum PlaneCurve {
    /// `t -> r (cos(t/r), sin(t/r))`, unit speed.
    Circle { radius: f64 },
    /// `t -> (t, a t^2)`.
    Parabola { a: f64 },
}

/// One monomial of a polynomial height function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub exps: Vec<u8>,
}

impl Term {
    pub fn new(coeff: f64, exps: &[u8]) -> Self {
        Self {
            coeff,
            exps: exps.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constructor {
    /// Standard inclusion `R^n -> R^(n+p)`.
    Affine { n: usize, p: usize },
    /// Round sphere of the given radius in hyperspherical angles.
    Sphere { n: usize, radius: f64 },
    /// `(t, s_1..s_(n-1)) -> (c(t), s)`.
    Cylinder { curve: PlaneCurve, n: usize },
    /// Product of two unit circles in `R^4`.
    CliffordTorus,
    Product {
        left: Box<Constructor>,
        right: Box<Constructor>,
    },
    /// Isometric map `R^dim -> R^(dim+1)` curling the coordinate `<y, direction>`
    /// onto a circle of the given radius in a new ambient direction.
    FlatBend {
        dim: usize,
        direction: Vec<f64>,
        radius: f64,
    },
    Compose {
        outer: Box<Constructor>,
        inner: Box<Constructor>,
    },
    /// Graph `x -> (x, h_1(x), .., h_p(x))` of polynomial height functions.
    Graph { n: usize, heights: Vec<Vec<Term>> },
    /// Ruled hypersurface `(a1, a2, b1, b2) -> (b1 W1(a) + b2 W2(a), a1, a2)` of
    /// `R^5` with `W1 = (cos a1, sin a1, 0)` and `W2 = (sin a2, 0, cos a2)`.
    RuledPlanes,
}

impl Constructor {
    pub fn dim_in(&self) -> usize {
        match self {
            Self::Affine { n, .. } | Self::Sphere { n, .. } | Self::Cylinder { n, .. } => *n,
            Self::CliffordTorus => 2,
            Self::Product { left, right } => left.dim_in() + right.dim_in(),
            Self::FlatBend { dim, .. } => *dim,
            Self::Compose { inner, .. } => inner.dim_in(),
            Self::Graph { n, .. } => *n,
            Self::RuledPlanes => 4,
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            Self::Affine { n, p } => n + p,
            Self::Sphere { n, .. } | Self::Cylinder { n, .. } => n + 1,
            Self::CliffordTorus => 4,
            Self::Product { left, right } => left.dim_out() + right.dim_out(),
            Self::FlatBend { dim, .. } => dim + 1,
            Self::Compose { outer, .. } => outer.dim_out(),
            Self::Graph { n, heights } => n + heights.len(),
            Self::RuledPlanes => 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Self::Affine { .. } => Ok(()),
            Self::Sphere { n, radius } => {
                if *n == 0 || !(*radius > 0.0) {
                    bad(format!(
                        "sphere needs n >= 1 and radius > 0 (n={n}, radius={radius})"
                    ))
                } else {
                    Ok(())
                }
            }
            Self::Cylinder { curve, n } => {
                if *n == 0 {
                    return bad("cylinder needs n >= 1".into());
                }
                match curve {
                    PlaneCurve::Circle { radius } if !(*radius > 0.0) => {
                        bad(format!("circle radius must be positive, got {radius}"))
                    }
                    _ => Ok(()),
                }
            }
            Self::CliffordTorus | Self::RuledPlanes => Ok(()),
            Self::Product { left, right } => {
                left.validate()?;
                right.validate()
            }
            Self::FlatBend {
                dim,
                direction,
                radius,
            } => {
                if direction.len() != *dim {
                    return Err(Error::DimensionMismatch(format!(
                        "bend direction has {} entries, expected {dim}",
                        direction.len()
                    )));
                }
                let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return bad(format!(
                        "bend direction must be a unit vector (norm {norm})"
                    ));
                }
                if !(*radius > 0.0) {
                    return bad(format!("bend radius must be positive, got {radius}"));
                }
                Ok(())
            }
            Self::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                if outer.dim_in() != inner.dim_out() {
                    return Err(Error::DimensionMismatch(format!(
                        "compose: inner lands in R^{} but outer is defined on R^{}",
                        inner.dim_out(),
                        outer.dim_in()
                    )));
                }
                Ok(())
            }
            Self::Graph { n, heights } => {
                for h in heights {
                    for t in h {
                        if t.exps.len() != *n {
                            return Err(Error::DimensionMismatch(format!(
                                "height term has {} exponents, expected {n}",
                                t.exps.len()
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates the map on Taylor arguments (one per input coordinate).
    pub fn eval(&self, x: &[Taylor]) -> Result<Vec<Taylor>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "constructor expects {} inputs, got {}",
                self.dim_in(),
                x.len()
            )));
        }
        let basis = x[0].basis().clone();
        let zero = || Taylor::zero(&basis);
        Ok(match self {
            Self::Affine { n: _, p } => {
                let mut out: Vec<Taylor> = x.to_vec();
                out.extend((0..*p).map(|_| zero()));
                out
            }
            Self::Sphere { n, radius } => {
                let mut out = Vec::with_capacity(n + 1);
                let mut prod = Taylor::constant(&basis, *radius);
                for theta in x {
                    out.push(&prod * &theta.cos());
                    prod = &prod * &theta.sin();
                }
                out.push(prod);
                out
            }
            Self::Cylinder { curve, .. } => {
                let t = &x[0];
                let mut out = match curve {
                    PlaneCurve::Circle { radius } => {
                        let u = t.scale(1.0 / radius);
                        vec![u.cos().scale(*radius), u.sin().scale(*radius)]
                    }
                    PlaneCurve::Parabola { a } => vec![t.clone(), (t * t).scale(*a)],
                };
                out.extend(x[1..].iter().cloned());
                out
            }
            Self::CliffordTorus => vec![x[0].cos(), x[0].sin(), x[1].cos(), x[1].sin()],
            Self::Product { left, right } => {
                let k = left.dim_in();
                let mut out = left.eval(&x[..k])?;
                out.extend(right.eval(&x[k..])?);
                out
            }
            Self::FlatBend {
                direction, radius, ..
            } => {
                let mut s = zero();
                for (xi, ui) in x.iter().zip(direction) {
                    s = &s + &xi.scale(*ui);
                }
                let angle = s.scale(1.0 / radius);
                let shift = &angle.sin().scale(*radius) - &s;
                let mut out: Vec<Taylor> = x
                    .iter()
                    .zip(direction)
                    .map(|(xi, ui)| xi + &shift.scale(*ui))
                    .collect();
                out.push(angle.cos().scale(-radius).add_const(*radius));
                out
            }
            Self::Compose { outer, inner } => outer.eval(&inner.eval(x)?)?,
            Self::Graph { heights, .. } => {
                let mut out: Vec<Taylor> = x.to_vec();
                for h in heights {
                    let mut acc = zero();
                    for term in h {
                        let mut m = Taylor::constant(&basis, term.coeff);
                        for (xi, &e) in x.iter().zip(&term.exps) {
                            if e > 0 {
                                m = &m * &xi.powi(u32::from(e));
                            }
                        }
                        acc = &acc + &m;
                    }
                    out.push(acc);
                }
                out
            }
            Self::RuledPlanes => {
                let (a1, a2, b1, b2) = (&x[0], &x[1], &x[2], &x[3]);
                let w1 = [a1.cos(), a1.sin(), zero()];
                let w2 = [a2.sin(), zero(), a2.cos()];
                let mut out: Vec<Taylor> = w1
                    .iter()
                    .zip(&w2)
                    .map(|(u, v)| &(b1 * u) + &(b2 * v))
                    .collect();
                out.push(a1.clone());
                out.push(a2.clone());
                out
            }
        })
    }
}

/// Expected invariants of a catalog member on its domain box.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu_g: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim_s_beta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim_delta_beta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<CaseTag>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
}

/// A named immersion with its chart box and optional annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionDef {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Closed chart box, one `[lo, hi]` per coordinate.
    pub domain: Vec<[f64; 2]>,
    pub constructor: Constructor,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<Expected>,
}

impl ImmersionDef {
    pub fn new(name: &str, constructor: Constructor, domain: Vec<[f64; 2]>) -> Result<Self> {
        constructor.validate()?;
        let n = constructor.dim_in();
        let out = constructor.dim_out();
        if out < n {
            return Err(Error::DimensionMismatch(format!(
                "`{name}` maps R^{n} into R^{out}"
            )));
        }
        if domain.len() != n || domain.iter().any(|[lo, hi]| !(lo <= hi)) {
            return Err(Error::InvalidParameter(format!(
                "`{name}` needs a valid {n}-dimensional box"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            n,
            p: out - n,
            domain,
            constructor,
            expected: None,
        })
    }

    /// Definition with an unbounded chart box; panics on invalid parameters.
    pub fn unbounded(name: &str, constructor: Constructor) -> Self {
        let n = constructor.dim_in();
        Self::new(
            name,
            constructor,
            vec![[f64::NEG_INFINITY, f64::INFINITY]; n],
        )
        .expect("invalid constructor")
    }

    pub fn with_expected(mut self, expected: Expected) -> Self {
        self.expected = Some(expected);
        self
    }

    pub fn contains(&self, x: &ChartPoint) -> bool {
        x.dim() == self.n
            && x.coords
                .iter()
                .zip(&self.domain)
                .all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    pub fn center(&self) -> ChartPoint {
        ChartPoint::new(
            self.domain
                .iter()
                .map(|[lo, hi]| {
                    if lo.is_finite() && hi.is_finite() {
                        0.5 * (lo + hi)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }

    /// Validates the constructor and dimensions of a deserialized definition.
    pub fn check(&self) -> Result<()> {
        let fresh = Self::new(&self.name, self.constructor.clone(), self.domain.clone())?;
        if fresh.n != self.n || fresh.p != self.p {
            return Err(Error::DimensionMismatch(format!(
                "`{}` declares n={}, p={} but its constructor gives n={}, p={}",
                self.name, self.n, self.p, fresh.n, fresh.p
            )));
        }
        Ok(())
    }
}

/// `flat_bend(dim, coordinate, radius)`: bend of the 1-based `coordinate`.
pub fn flat_bend(dim: usize, coordinate: usize, radius: f64) -> Result<Constructor> {
    if coordinate == 0 || coordinate > dim {
        return Err(Error::InvalidParameter(format!(
            "bend coordinate {coordinate} outside 1..={dim}"
        )));
    }
    let mut direction = vec![0.0; dim];
    direction[coordinate - 1] = 1.0;
    let c = Constructor::FlatBend {
        dim,
        direction,
        radius,
    };
    c.validate()?;
    Ok(c)
}

/// Bend along an arbitrary unit direction.
pub fn flat_bend_along(direction: Vec<f64>, radius: f64) -> Result<Constructor> {
    let c = Constructor::FlatBend {
        dim: direction.len(),
        direction,
        radius,
    };
    c.validate()?;
    Ok(c)
}

pub fn compose(outer: Constructor, inner: Constructor) -> Result<Constructor> {
    let c = Constructor::Compose {
        outer: Box::new(outer),
        inner: Box::new(inner),
    };
    c.validate()?;
    Ok(c)
}

pub fn product(left: Constructor, right: Constructor) -> Constructor {
    Constructor::Product {
        left: Box::new(left),
        right: Box::new(right),
    }
}

pub fn sphere(n: usize) -> Constructor {
    Constructor::Sphere { n, radius: 1.0 }
}

pub fn unit_cylinder() -> Constructor {
    Constructor::Cylinder {
        curve: PlaneCurve::Circle { radius: 1.0 },
        n: 2,
    }
}

/// Applies bends along the given orthonormal directions of `R^m`, one after
/// another; each bend adds one ambient coordinate.
fn bend_sequence(
    inner: Constructor,
    directions: &[Vec<f64>],
    radii: &[f64],
) -> Result<Constructor> {
    let mut current = inner;
    for (dir, r) in directions.iter().zip(radii) {
        let mut padded = dir.clone();
        padded.resize(current.dim_out(), 0.0);
        current = compose(flat_bend_along(padded, *r)?, current)?;
    }
    Ok(current)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Two orthonormal directions in `R^dim` mixing sphere axes `e1`, `e2` with the
/// line coordinate `w`: `u1 = c e1 + s w`, `u2 = a e2 + b (-s e1 + c w)`.
fn twist_directions(dim: usize, w: usize) -> Vec<Vec<f64>> {
    let (s1, c1) = 0.6f64.sin_cos();
    let (a, b) = (0.6, 0.8);
    let mut u1 = vec![0.0; dim];
    u1[0] = c1;
    u1[w] = s1;
    let mut u2 = vec![0.0; dim];
    u2[1] = a;
    u2[0] = -b * s1;
    u2[w] = b * c1;
    vec![unit(&u1), unit(&u2)]
}

/// Rows of a rotation of `R^3` with no zero entries.
fn generic_rotation() -> [[f64; 3]; 3] {
    let (sa, ca) = 0.7f64.sin_cos();
    let (sb, cb) = 0.9f64.sin_cos();
    let (sc, cc) = 0.4f64.sin_cos();
    // Rz(a) Ry(b) Rz(c)
    [
        [ca * cb * cc - sa * sc, -ca * cb * sc - sa * cc, ca * sb],
        [sa * cb * cc + ca * sc, -sa * cb * sc + ca * cc, sa * sb],
        [-sb * cc, sb * sc, cb],
    ]
}

fn angles_box(k: usize) -> Vec<[f64; 2]> {
    let mut b = vec![[0.6, 2.5]; k.saturating_sub(1)];
    b.push([-2.8, 2.8]);
    b
}

/// The full annotated catalog in deterministic order.
pub fn list_catalog() -> Vec<ImmersionDef> {
    build_catalog().expect("catalog constructors are valid")
}

fn build_catalog() -> Result<Vec<ImmersionDef>> {
    use CaseTag::*;
    let ann = |mu, nu_g, s, db, case, ell, k| Expected {
        mu: Some(mu),
        nu_g: Some(nu_g),
        dim_s_beta: Some(s),
        dim_delta_beta: Some(db),
        case: Some(case),
        ell: Some(ell),
        k: Some(k),
    };
    let s2xr = product(sphere(2), Constructor::Affine { n: 1, p: 0 });
    let s3xr2 = product(sphere(3), Constructor::Affine { n: 2, p: 0 });
    let s2xr2 = product(sphere(2), Constructor::Affine { n: 2, p: 0 });

    let mut out = Vec::new();

    out.push(
        ImmersionDef::new(
            "affine_3_2",
            Constructor::Affine { n: 3, p: 2 },
            vec![[-1.0, 1.0]; 3],
        )?
        .with_expected(ann(3, 3, 0, 3, TrivialEqualNullities, 2, 0)),
    );
    out.push(
        ImmersionDef::new("sphere_2", sphere(2), angles_box(2))?.with_expected(ann(
            0,
            0,
            0,
            2,
            TrivialEqualNullities,
            1,
            1,
        )),
    );
    out.push(
        ImmersionDef::new(
            "clifford_torus",
            Constructor::CliffordTorus,
            vec![[-3.0, 3.0]; 2],
        )?
        .with_expected(ann(2, 0, 2, 0, FlatExtreme, 0, 0)),
    );
    out.push(
        ImmersionDef::new(
            "cylinder_parabola_3",
            Constructor::Cylinder {
                curve: PlaneCurve::Parabola { a: 0.5 },
                n: 3,
            },
            vec![[-1.0, 1.0]; 3],
        )?
        .with_expected(ann(3, 2, 1, 2, FlatExtreme, 0, 0)),
    );
    let mut b = angles_box(2);
    b.push([-1.0, 1.0]);
    out.push(
        ImmersionDef::new("s2xR", s2xr.clone(), b.clone())?.with_expected(ann(
            1,
            1,
            0,
            3,
            TrivialEqualNullities,
            1,
            1,
        )),
    );
    out.push(
        ImmersionDef::new("compo_s2xR_bend", compose(flat_bend(4, 4, 1.0)?, s2xr)?, b)?
            .with_expected(ann(1, 0, 1, 2, CompositionBound, 1, 1)),
    );

    let mut b5 = angles_box(3);
    b5.extend([[-1.0, 1.0], [-1.0, 1.0]]);
    out.push(
        ImmersionDef::new(
            "compo_s3xr2_twist",
            bend_sequence(s3xr2.clone(), &twist_directions(6, 4), &[0.8, 1.3])?,
            b5.clone(),
        )?
        .with_expected(ann(2, 1, 2, 3, RankOneLK1, 1, 1)),
    );

    let rot = generic_rotation();
    let ruled_dirs: Vec<Vec<f64>> = rot
        .iter()
        .map(|row| {
            let mut d = vec![0.0; 6];
            d[3] = row[0];
            d[4] = row[1];
            d[5] = row[2];
            d
        })
        .collect();
    out.push(
        ImmersionDef::new(
            "ruled_planes_k0",
            bend_sequence(
                product(Constructor::RuledPlanes, Constructor::Affine { n: 1, p: 0 }),
                &ruled_dirs,
                &[0.9, 1.1, 1.4],
            )?,
            vec![[0.5, 1.2], [-0.5, 0.5], [0.6, 1.4], [0.6, 1.4], [-0.5, 0.5]],
        )?
        .with_expected(ann(1, 0, 3, 2, RankOneLK0Ruled, 1, 0)),
    );

    let mut b4 = angles_box(2);
    b4.extend([[-1.0, 1.0], [-1.0, 1.0]]);
    out.push(
        ImmersionDef::new(
            "unclassified_s2xr2_twist",
            bend_sequence(s2xr2, &twist_directions(5, 3), &[0.8, 1.3])?,
            b4,
        )?
        .with_expected(ann(2, 1, 2, 2, Unclassified, 1, 1)),
    );

    let mut e5 = vec![0.0; 6];
    e5[4] = 1.0;
    let mut e1 = vec![0.0; 6];
    e1[0] = 1.0;
    out.push(
        ImmersionDef::new(
            "compo_s3xr2_double",
            bend_sequence(s3xr2, &[e5, e1], &[1.0, 1.5])?,
            b5,
        )?
        .with_expected(ann(2, 1, 1, 4, CompositionBound, 2, 2)),
    );

    out.push(
        ImmersionDef::new(
            "graph_square_2",
            Constructor::Graph {
                n: 2,
                heights: vec![
                    vec![Term::new(0.5, &[2, 0]), Term::new(-0.5, &[0, 2])],
                    vec![Term::new(1.0, &[1, 1])],
                ],
            },
            vec![[0.3, 1.0], [0.3, 1.0]],
        )?
        .with_expected(ann(0, 0, 0, 2, TrivialEqualNullities, 2, 2)),
    );
    Ok(out)
}

pub fn by_name(name: &str) -> Result<ImmersionDef> {
    list_catalog()
        .into_iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownImmersion(name.to_string()))
}

/// Versioned catalog manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub immersions: Vec<ImmersionDef>,
}

impl Manifest {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn catalog() -> Self {
        Self {
            schema_version: Self::SCHEMA_VERSION,
            immersions: list_catalog(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("manifest: {e}")))?;
        if m.schema_version != Self::SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported manifest schema_version {}",
                m.schema_version
            )));
        }
        for d in &m.immersions {
            d.check()?;
        }
        Ok(m)
    }

    pub fn find(&self, name: &str) -> Result<&ImmersionDef> {
        self.immersions
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownImmersion(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::lift;

    #[test]
    fn catalog_is_deterministic_and_covers_cases() {
        let a = list_catalog();
        let b = list_catalog();
        assert_eq!(a, b);
        assert!(a.len() >= 8);
        let cases: Vec<CaseTag> = a
            .iter()
            .filter_map(|d| d.expected.as_ref().and_then(|e| e.case))
            .collect();
        for c in [
            CaseTag::TrivialEqualNullities,
            CaseTag::FlatExtreme,
            CaseTag::CompositionBound,
            CaseTag::RankOneLK1,
            CaseTag::RankOneLK0Ruled,
            CaseTag::Unclassified,
        ] {
            assert!(cases.contains(&c), "missing {c:?}");
        }
        assert_eq!(a[4].name, "s2xR");
        assert_eq!(a[5].name, "compo_s2xR_bend");
        assert_eq!((a[5].n, a[5].p), (3, 2));
        assert_eq!((a[6].n, a[6].p), (5, 3));
    }

    #[test]
    fn invalid_parameters() {
        assert!(flat_bend(3, 0, 1.0).is_err());
        assert!(flat_bend(3, 2, -1.0).is_err());
        assert!(flat_bend_along(vec![1.0, 1.0], 1.0).is_err());
        assert!(compose(flat_bend(3, 1, 1.0).unwrap(), sphere(3)).is_err());
        assert!(ImmersionDef::new("s", sphere(2), vec![[0.0, 1.0]]).is_err());
        assert!(matches!(by_name("nope"), Err(Error::UnknownImmersion(_))));
    }

    #[test]
    fn flat_bend_is_isometric() {
        let bend = ImmersionDef::unbounded(
            "bend",
            flat_bend_along(unit(&[0.3, -0.5, 0.8]), 0.7).unwrap(),
        );
        for x in [[0.1, 0.2, 0.3], [-1.0, 2.0, 0.5], [3.0, -2.0, 1.0]] {
            let j = lift(&bend, &ChartPoint::new(x.to_vec()), 1)
                .unwrap()
                .jacobian();
            let g = j.transpose() * j;
            let err = (g - nalgebra::DMatrix::<f64>::identity(3, 3)).amax();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest::catalog();
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back = Manifest::from_json(&text).unwrap();
        assert_eq!(back, m);
        let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(Manifest::from_json(&bad).is_err());
    }
}
