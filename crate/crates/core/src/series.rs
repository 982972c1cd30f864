//! Matrix-valued truncated Taylor series and smooth projector fields.
//!
//! A [`MatSeries`] is a matrix whose entries are [`Taylor`] polynomials in a
//! chart offset, stored as one coefficient matrix per monomial. Kernel and
//! range projectors of constant-rank fields are expanded order by order,
//! which gives exact derivatives of subspace fields such as the span of the
//! second fundamental form without any finite differencing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::taylor::{MonomialBasis, Taylor};

#[derive(Debug, Clone)]
pub struct MatSeries {
    basis: Arc<MonomialBasis>,
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl MatSeries {
    pub fn zeros(basis: &Arc<MonomialBasis>, rows: usize, cols: usize) -> Self {
        Self {
            basis: basis.clone(),
            rows,
            cols,
            coeffs: vec![DMatrix::zeros(rows, cols); basis.len()],
        }
    }

    pub fn constant(basis: &Arc<MonomialBasis>, m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(basis, m.nrows(), m.ncols());
        out.coeffs[0].copy_from(m);
        out
    }

    pub fn identity(basis: &Arc<MonomialBasis>, n: usize) -> Self {
        Self::constant(basis, &DMatrix::identity(n, n))
    }

    /// Builds a series from row-major entries sharing one basis.
    pub fn from_entries(rows: usize, cols: usize, entries: &[Taylor]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        let basis = entries[0].basis().clone();
        let mut out = Self::zeros(&basis, rows, cols);
        for (idx, t) in entries.iter().enumerate() {
            let (r, c) = (idx / cols, idx % cols);
            for (k, v) in t.coeffs().iter().enumerate() {
                out.coeffs[k][(r, c)] = *v;
            }
        }
        out
    }

    /// Column vector series from one polynomial per entry.
    pub fn column(entries: &[Taylor]) -> Self {
        Self::from_entries(entries.len(), 1, entries)
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn value(&self) -> &DMatrix<f64> {
        &self.coeffs[0]
    }

    pub fn coeff(&self, k: usize) -> &DMatrix<f64> {
        &self.coeffs[k]
    }

    pub fn entry(&self, r: usize, c: usize) -> Taylor {
        Taylor::from_coeffs(&self.basis, self.coeffs.iter().map(|m| m[(r, c)]).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    /// First partial derivative at the expansion point.
    pub fn gradient(&self, var: usize) -> &DMatrix<f64> {
        &self.coeffs[self.basis.linear(var)]
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order());
        let basis = MonomialBasis::get(self.nvars(), order);
        Self {
            coeffs: self.coeffs[..basis.len()].to_vec(),
            basis,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.order() >= 1);
        let basis = MonomialBasis::get(self.nvars(), self.order() - 1);
        let mut e = vec![0u8; self.nvars()];
        let coeffs = (0..basis.len())
            .map(|k| {
                e.copy_from_slice(basis.exponent(k));
                e[var] += 1;
                let src = self.basis.index_of(&e).expect("monomial in parent basis");
                &self.coeffs[src] * f64::from(e[var])
            })
            .collect();
        Self {
            basis,
            rows: self.rows,
            cols: self.cols,
            coeffs,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            rows: self.cols,
            cols: self.rows,
            coeffs: self.coeffs.iter().map(|m| m.transpose()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|m| m * s).collect(),
            ..self.clone()
        }
    }

    fn common(&self, other: &Self) -> (Self, Self) {
        let order = self.order().min(other.order());
        (self.truncate(order), other.truncate(order))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = self.common(other);
        Self {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
            ..a
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = self.common(other);
        Self {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
            ..a
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "series shape mismatch");
        let (a, b) = self.common(other);
        let mut out = Self::zeros(&a.basis, a.rows, b.cols);
        for &(i, j, k) in a.basis.products() {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            out.coeffs[k].gemm(1.0, &a.coeffs[i], &b.coeffs[j], 1.0);
        }
        out
    }

    pub fn left_mul(&self, m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            coeffs: self.coeffs.iter().map(|c| m * c).collect(),
            ..self.clone()
        }
    }

    pub fn right_mul(&self, m: &DMatrix<f64>) -> Self {
        Self {
            cols: m.ncols(),
            coeffs: self.coeffs.iter().map(|c| c * m).collect(),
            ..self.clone()
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> Self {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.right_mul(&m)
    }

    /// Inverse of a series whose value is invertible.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.rows;
        let inv0 = self.coeffs[0]
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonFinite("singular series value".into()))?;
        let mut out = Self::zeros(&self.basis, n, n);
        out.coeffs[0] = inv0.clone();
        let products = self.basis.products();
        for deg in 1..=self.order() {
            for m in self.basis.degree_range(deg) {
                let mut acc = DMatrix::zeros(n, n);
                for &(i, j, k) in products {
                    if k as usize == m && i != 0 {
                        acc += &self.coeffs[i as usize] * &out.coeffs[j as usize];
                    }
                }
                out.coeffs[m] = -(&inv0 * acc);
            }
        }
        Ok(out)
    }

    /// Value at a chart offset.
    pub fn eval_offset(&self, h: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (k, c) in self.coeffs.iter().enumerate() {
            let w: f64 = self
                .basis
                .exponent(k)
                .iter()
                .zip(h)
                .map(|(&e, x)| x.powi(i32::from(e)))
                .product();
            out += c * w;
        }
        out
    }

    pub fn vstack(parts: &[&MatSeries]) -> Self {
        let rows = parts.iter().map(|p| p.rows).sum();
        let cols = parts[0].cols;
        let order = parts.iter().map(|p| p.order()).min().unwrap();
        let basis = MonomialBasis::get(parts[0].nvars(), order);
        let mut out = Self::zeros(&basis, rows, cols);
        let mut off = 0;
        for p in parts {
            for k in 0..basis.len() {
                out.coeffs[k].rows_mut(off, p.rows).copy_from(&p.coeffs[k]);
            }
            off += p.rows;
        }
        out
    }

    pub fn hstack(parts: &[&MatSeries]) -> Self {
        let t: Vec<MatSeries> = parts.iter().map(|p| p.transpose()).collect();
        let refs: Vec<&MatSeries> = t.iter().collect();
        Self::vstack(&refs).transpose()
    }

    /// Builds a series whose coefficient matrices are produced from those of
    /// `self` by a fixed linear rearrangement.
    pub fn map_coeffs(
        &self,
        rows: usize,
        cols: usize,
        f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    ) -> Self {
        let coeffs: Vec<DMatrix<f64>> = self.coeffs.iter().map(f).collect();
        debug_assert!(coeffs.iter().all(|c| c.shape() == (rows, cols)));
        Self {
            basis: self.basis.clone(),
            rows,
            cols,
            coeffs,
        }
    }
}

/// Projector field onto the kernel of a symmetric positive semidefinite
/// field `a` whose value has exactly `rank` nonzero eigenvalues.
///
/// With `P0` the kernel projector of the value, `Q0 = I - P0` and `A0^+` its
/// pseudo-inverse, the coefficient of each monomial `m` is determined by
/// `A P = 0`, `P^2 = P` and symmetry:
/// `P_m = -A0^+ E_m P0 - (A0^+ E_m P0)^T - P0 F_m P0 + Q0 F_m Q0`, where
/// `E_m = sum_{i != 0} A_i P_(m-i)` and `F_m = sum_{a, b != 0} P_a P_b`.
pub fn kernel_projector_sym(a: &MatSeries, rank: usize) -> MatSeries {
    let n = a.rows;
    let (vals, vecs) = sorted_symmetric_eigen(a.value());
    let mut pinv = DMatrix::zeros(n, n);
    let mut q0 = DMatrix::zeros(n, n);
    for i in 0..rank {
        let v = vecs.column(i);
        pinv += v * v.transpose() / vals[i];
        q0 += v * v.transpose();
    }
    let p0 = DMatrix::identity(n, n) - &q0;
    let mut out = MatSeries::zeros(&a.basis, n, n);
    out.coeffs[0] = p0.clone();
    let products = a.basis.products();
    for deg in 1..=a.order() {
        for m in a.basis.degree_range(deg) {
            let mut e = DMatrix::zeros(n, n);
            let mut f = DMatrix::zeros(n, n);
            for &(i, j, k) in products {
                if k as usize != m || i == 0 {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                e += &a.coeffs[i] * &out.coeffs[j];
                if j != 0 {
                    f += &out.coeffs[i] * &out.coeffs[j];
                }
            }
            let t = &pinv * e * &p0;
            out.coeffs[m] = -&t - t.transpose() - &p0 * &f * &p0 + &q0 * &f * &q0;
        }
    }
    out
}

fn rank_with_tol(m: &DMatrix<f64>, tol: f64) -> usize {
    crate::linalg::numerical_rank(m, tol)
}

/// Kernel projector field of `m` (as a map on its columns) and the rank of `m`.
pub fn kernel_projector(m: &MatSeries, tol: f64) -> (MatSeries, usize) {
    let rank = rank_with_tol(m.value(), tol);
    let a = m.transpose().mul(m);
    (kernel_projector_sym(&a, rank), rank)
}

/// Projector field onto the column span of `m` and its rank.
pub fn range_projector(m: &MatSeries, tol: f64) -> (MatSeries, usize) {
    let rank = rank_with_tol(m.value(), tol);
    let a = m.mul(&m.transpose());
    let k = kernel_projector_sym(&a, rank);
    (MatSeries::identity(&k.basis, m.rows).sub(&k), rank)
}

/// Orthonormal basis of the range of a projector value, with a deterministic
/// gauge: each vector's largest-magnitude entry is positive.
pub fn projector_basis(p: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let (_, vecs) = sorted_symmetric_eigen(p);
    let n = p.nrows();
    let mut out = DMatrix::zeros(n, rank);
    for i in 0..rank {
        let mut v = vecs.column(i).into_owned();
        let k = v.iamax();
        if v[k] < 0.0 {
            v = -v;
        }
        out.set_column(i, &v);
    }
    out
}
