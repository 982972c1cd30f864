//! Truncated multivariate Taylor polynomials.
//!
//! A [`Taylor`] value stores the coefficients of a polynomial in `nvars`
//! variables, truncated at total degree `order`. Coefficients are indexed by
//! monomials in graded lexicographic order, and the coefficient of `x^e` is
//! the partial derivative `∂^e f / e!`. Arithmetic on these values is exact
//! up to the truncation, which is what makes jets of immersions exact to
//! machine precision.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Largest truncation order supported by the monomial tables.
pub const MAX_ORDER: usize = 5;

/// Monomial table for a fixed number of variables and truncation order.
pub struct MonomialBasis {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree_start: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `exps[i] + exps[j] = exps[k]`.
    products: Vec<(u32, u32, u32)>,
}

impl MonomialBasis {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exps = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for deg in 0..=order {
            degree_start.push(exps.len());
            let mut cur = vec![0u8; nvars];
            push_graded(&mut exps, &mut cur, 0, deg);
        }
        degree_start.push(exps.len());
        let lookup: HashMap<Vec<u8>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in exps.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        Self {
            nvars,
            order,
            exps,
            degree_start,
            lookup,
            products,
        }
    }

    /// Shared basis for `(nvars, order)`; tables are built once per process.
    pub fn get(nvars: usize, order: usize) -> Arc<MonomialBasis> {
        assert!(
            order <= MAX_ORDER,
            "truncation order {order} exceeds {MAX_ORDER}"
        );
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("monomial cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(MonomialBasis::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, idx: usize) -> &[u8] {
        &self.exps[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.exps[idx].iter().map(|&v| v as usize).sum()
    }

    /// Index range of the monomials of total degree `deg`.
    pub fn degree_range(&self, deg: usize) -> std::ops::Range<usize> {
        self.degree_start[deg]..self.degree_start[deg + 1]
    }

    pub fn index_of(&self, exp: &[u8]) -> Option<usize> {
        self.lookup.get(exp).copied()
    }

    /// Index of the monomial `x_i`.
    pub fn linear(&self, var: usize) -> usize {
        1 + var
    }

    /// Index of the monomial `x_i x_j` (or `x_i^2`).
    pub fn quadratic(&self, i: usize, j: usize) -> usize {
        let mut e = vec![0u8; self.nvars];
        e[i] += 1;
        e[j] += 1;
        self.lookup[&e]
    }

    pub fn products(&self) -> &[(u32, u32, u32)] {
        &self.products
    }
}

impl fmt::Debug for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonomialBasis")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.exps.len())
            .finish()
    }
}

fn push_graded(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == cur.len() || cur.is_empty() {
        if !cur.is_empty() {
            cur[var] = remaining as u8;
            out.push(cur.clone());
            cur[var] = 0;
        } else if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for take in (0..=remaining).rev() {
        cur[var] = take as u8;
        push_graded(out, cur, var + 1, remaining - take);
    }
    cur[var] = 0;
}

/// Truncated multivariate Taylor polynomial with `f64` coefficients.
#[derive(Clone)]
pub struct Taylor {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Taylor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taylor")
            .field("nvars", &self.basis.nvars)
            .field("order", &self.basis.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Taylor {
    fn eq(&self, other: &Self) -> bool {
        self.basis.nvars == other.basis.nvars
            && self.basis.order == other.basis.order
            && self.coeffs == other.coeffs
    }
}

impl Taylor {
    pub fn zero(basis: &Arc<MonomialBasis>) -> Self {
        Self {
            basis: basis.clone(),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn constant(basis: &Arc<MonomialBasis>, value: f64) -> Self {
        let mut t = Self::zero(basis);
        t.coeffs[0] = value;
        t
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(basis: &Arc<MonomialBasis>, var: usize, value: f64) -> Self {
        let mut t = Self::constant(basis, value);
        if basis.order >= 1 {
            t.coeffs[basis.linear(var)] = 1.0;
        }
        t
    }

    pub fn from_coeffs(basis: &Arc<MonomialBasis>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), basis.len());
        Self {
            basis: basis.clone(),
            coeffs,
        }
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exp: &[u8]) -> f64 {
        self.basis.index_of(exp).map_or(0.0, |i| self.coeffs[i])
    }

    /// First partial derivative `∂f/∂x_i` at the expansion point.
    pub fn gradient(&self, i: usize) -> f64 {
        if self.basis.order == 0 {
            0.0
        } else {
            self.coeffs[self.basis.linear(i)]
        }
    }

    /// Second partial derivative `∂²f/∂x_i∂x_j` at the expansion point.
    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        if self.basis.order < 2 {
            return 0.0;
        }
        let c = self.coeffs[self.basis.quadratic(i, j)];
        if i == j {
            2.0 * c
        } else {
            c
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_const(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Drops every monomial of total degree above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.basis.order);
        if order == self.basis.order {
            return self.clone();
        }
        let basis = MonomialBasis::get(self.basis.nvars, order);
        let end = basis.len();
        Self {
            basis,
            coeffs: self.coeffs[..end].to_vec(),
        }
    }

    /// Partial derivative with respect to `var`; the result has order one less.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(
            self.basis.order >= 1,
            "cannot differentiate an order-0 polynomial"
        );
        let basis = MonomialBasis::get(self.basis.nvars, self.basis.order - 1);
        let mut coeffs = vec![0.0; basis.len()];
        let mut e = vec![0u8; self.basis.nvars];
        for (k, out) in coeffs.iter_mut().enumerate() {
            e.copy_from_slice(basis.exponent(k));
            e[var] += 1;
            let src = self.basis.lookup[&e];
            *out = self.coeffs[src] * f64::from(e[var]);
        }
        Self { basis, coeffs }
    }

    /// Evaluates the polynomial at an offset `h` from the expansion point.
    pub fn eval_offset(&self, h: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let mut term = *c;
            for (v, &p) in self.basis.exponent(k).iter().enumerate() {
                term *= h[v].powi(i32::from(p));
            }
            total += term;
        }
        total
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.basis, &other.basis)
                || (self.basis.nvars == other.basis.nvars && self.basis.order == other.basis.order),
            "incompatible Taylor bases"
        );
    }

    /// Applies a univariate function given its derivatives at the constant term:
    /// `derivs[k] = f^(k)(a0)`.
    pub fn apply_univariate(&self, derivs: &[f64]) -> Self {
        let order = self.basis.order;
        assert!(derivs.len() > order);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Self::constant(&self.basis, derivs[0]);
        let mut power = Self::constant(&self.basis, 1.0);
        let mut factorial = 1.0;
        for (k, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = &power * &h;
            factorial *= k as f64;
            let c = d / factorial;
            if c != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += c * p;
                }
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let d: Vec<f64> = (0..=self.order()).map(|k| [s, c, -s, -c][k % 4]).collect();
        self.apply_univariate(&d)
    }

    pub fn cos(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let d: Vec<f64> = (0..=self.order()).map(|k| [c, -s, -c, s][k % 4]).collect();
        self.apply_univariate(&d)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.apply_univariate(&vec![e; self.order() + 1])
    }

    /// `self^p` for real `p`; requires a positive constant term unless `p` is a
    /// non-negative integer.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for k in 0..=self.order() {
            d.push(coef * a.powf(p - k as f64));
            coef *= p - k as f64;
        }
        self.apply_univariate(&d)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for k in 0..=self.order() {
            d.push(coef / a.powi(k as i32 + 1));
            coef *= -((k + 1) as f64);
        }
        self.apply_univariate(&d)
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut d = vec![a.ln()];
        let mut coef = 1.0;
        for k in 1..=self.order() {
            d.push(coef / a.powi(k as i32));
            coef *= -(k as f64);
        }
        self.apply_univariate(&d)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, p: u32) -> Self {
        let mut out = Self::constant(&self.basis, 1.0);
        for _ in 0..p {
            out = &out * self;
        }
        out
    }

    /// Substitutes `inner` (one polynomial per variable of `self`) into `self`.
    ///
    /// `self` is read as a polynomial in the offsets from its expansion point,
    /// so each inner polynomial enters through `inner[i] - inner[i](0)`.
    pub fn substitute(&self, inner: &[Taylor]) -> Taylor {
        assert_eq!(inner.len(), self.basis.nvars);
        let ib = inner[0].basis.clone();
        let order = self.basis.order.min(ib.order);
        let target = MonomialBasis::get(ib.nvars, order);
        let offsets: Vec<Taylor> = inner
            .iter()
            .map(|t| {
                let mut h = t.truncate(order);
                h.coeffs[0] = 0.0;
                h
            })
            .collect();
        // powers[v][k] = offsets[v]^k
        let powers: Vec<Vec<Taylor>> = offsets
            .iter()
            .map(|h| {
                let mut ps = vec![Taylor::constant(&target, 1.0)];
                for k in 1..=order {
                    let next = &ps[k - 1] * h;
                    ps.push(next);
                }
                ps
            })
            .collect();
        let mut out = Taylor::zero(&target);
        for k in 0..self.basis.degree_range(order).end {
            let c = self.coeffs[k];
            if c == 0.0 {
                continue;
            }
            let mut term = Taylor::constant(&target, c);
            for (v, &p) in self.basis.exponent(k).iter().enumerate() {
                if p > 0 {
                    term = &term * &powers[v][p as usize];
                }
            }
            for (o, t) in out.coeffs.iter_mut().zip(&term.coeffs) {
                *o += t;
            }
        }
        out
    }
}

impl<'a> Add<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn add(self, rhs: &'a Taylor) -> Taylor {
        self.assert_compatible(rhs);
        Taylor {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &'a Taylor) -> Taylor {
        self.assert_compatible(rhs);
        Taylor {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<'a> Mul<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &'a Taylor) -> Taylor {
        self.assert_compatible(rhs);
        let mut coeffs = vec![0.0; self.basis.len()];
        for &(i, j, k) in self.basis.products() {
            let a = self.coeffs[i as usize];
            if a == 0.0 {
                continue;
            }
            coeffs[k as usize] += a * rhs.coeffs[j as usize];
        }
        Taylor {
            basis: self.basis.clone(),
            coeffs,
        }
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: &'a Taylor) -> Taylor {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let b = MonomialBasis::get(2, 2);
        let exps: Vec<Vec<u8>> = (0..b.len()).map(|i| b.exponent(i).to_vec()).collect();
        assert_eq!(
            exps,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(MonomialBasis::get(3, 3).len(), 20);
        assert_eq!(MonomialBasis::get(1, 0).len(), 1);
    }

    #[test]
    fn cos_expansion() {
        let b = MonomialBasis::get(1, 3);
        let t = Taylor::variable(&b, 0, 0.0);
        let c = t.cos();
        assert_eq!(c.coeffs(), &[1.0, 0.0, -0.5, 0.0]);
        let s = t.sin();
        assert!((s.coeffs()[3] + 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn product_rule_and_recip() {
        let b = MonomialBasis::get(2, 3);
        let x = Taylor::variable(&b, 0, 0.7);
        let y = Taylor::variable(&b, 1, -0.3);
        let f = (&x * &y).add_const(2.0);
        let one = &f * &f.recip();
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
        let s = f.sqrt();
        let back = &s * &s;
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        let l = f.ln().exp();
        for (a, b) in l.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_hessian() {
        let b = MonomialBasis::get(2, 3);
        let x = Taylor::variable(&b, 0, 0.4);
        let y = Taylor::variable(&b, 1, 1.1);
        let f = (&x * &y).sin();
        let fx = f.derivative(0);
        assert!((fx.gradient(1) - f.hessian(0, 1)).abs() < 1e-14);
        let fxx = fx.derivative(0);
        assert!((fxx.value() - f.hessian(0, 0)).abs() < 1e-14);
    }
}
