//! Numerically determined subspaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Default relative rank tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Linear subspace of `R^ambient` with an orthonormal basis (as columns) and
/// the tolerance that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
    pub tol: f64,
}

impl Subspace {
    pub fn zero(ambient: usize, tol: f64) -> Self {
        Self {
            basis: DMatrix::zeros(ambient, 0),
            tol,
        }
    }

    pub fn full(ambient: usize, tol: f64) -> Self {
        Self {
            basis: DMatrix::identity(ambient, ambient),
            tol,
        }
    }

    /// Orthonormalized column span of `vectors`.
    pub fn span(vectors: &DMatrix<f64>, tol: f64) -> Self {
        range_subspace(vectors, tol)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn complement(&self) -> Self {
        let n = self.ambient_dim();
        let q = DMatrix::identity(n, n) - self.projector();
        Self {
            basis: range_subspace(&q, 1e-6).basis,
            tol: self.tol,
        }
    }

    /// Distance of `v` from the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - &self.basis * (self.basis.transpose() * v)).norm()
    }

    /// Largest distance of a unit basis vector of `other` from `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        (0..other.dim())
            .map(|i| self.residual(&other.basis.column(i).into_owned()))
            .fold(0.0, f64::max)
    }

    /// Spectral norm of the projector difference, or 1 when dimensions differ.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() || self.ambient_dim() != other.ambient_dim() {
            return 1.0;
        }
        spectral_norm(&(self.projector() - other.projector()))
    }

    pub fn intersection(&self, other: &Subspace) -> Subspace {
        let n = self.ambient_dim();
        let id = DMatrix::<f64>::identity(n, n);
        let a = &id - self.projector();
        let b = &id - other.projector();
        let mut stacked = DMatrix::zeros(2 * n, n);
        stacked.rows_mut(0, n).copy_from(&a);
        stacked.rows_mut(n, n).copy_from(&b);
        kernel_subspace(&stacked, self.tol.max(other.tol))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let n = self.ambient_dim();
        let mut cols = DMatrix::zeros(n, self.dim() + other.dim());
        cols.columns_mut(0, self.dim()).copy_from(&self.basis);
        cols.columns_mut(self.dim(), other.dim())
            .copy_from(&other.basis);
        range_subspace(&cols, self.tol.max(other.tol))
    }

    /// Image of the subspace under a linear map.
    pub fn map(&self, m: &DMatrix<f64>) -> Subspace {
        range_subspace(&(m * &self.basis), self.tol)
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Singular values and right singular vectors, with `V` always square.
fn svd_full_v(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    (sv, vt.transpose())
}

fn threshold(sv: &[f64], tol: f64) -> f64 {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    tol * smax.max(1.0)
}

/// Kernel of `operator` (as a map on `R^cols`).
pub fn kernel_subspace(operator: &DMatrix<f64>, tol: f64) -> Subspace {
    let cols = operator.ncols();
    if cols == 0 {
        return Subspace::zero(0, tol);
    }
    if operator.nrows() == 0 {
        return Subspace::full(cols, tol);
    }
    let (sv, v) = svd_full_v(operator);
    let t = threshold(&sv, tol);
    let mut idx: Vec<usize> = (0..cols).filter(|&i| sv[i] < t).collect();
    idx.sort_unstable();
    let mut basis = DMatrix::zeros(cols, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        basis.set_column(k, &v.column(i));
    }
    Subspace { basis, tol }
}

/// Column span of `m`, with the same relative threshold as [`kernel_subspace`].
pub fn range_subspace(m: &DMatrix<f64>, tol: f64) -> Subspace {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return Subspace::zero(rows, tol);
    }
    let (sv, u) = svd_full_v(&m.transpose());
    let t = threshold(&sv, tol);
    let idx: Vec<usize> = (0..rows).filter(|&i| sv[i] >= t).collect();
    let mut basis = DMatrix::zeros(rows, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    Subspace { basis, tol }
}

/// Numerical rank with the relative threshold used throughout.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    let t = threshold(&sv, tol);
    sv.iter().filter(|&&s| s >= t).count()
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
///
/// Computed from the SVD of a positive definite shift of the matrix:
/// `symmetric_eigen` in nalgebra returns wrong eigenvectors for some nearly
/// diagonal inputs with clustered eigenvalues.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let shift = sym.norm() + 1.0;
    let shifted = &sym + DMatrix::<f64>::identity(n, n) * shift;
    let svd = shifted.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut vecs = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let v = u.column(i);
        values.push(v.dot(&(&sym * v)));
        vecs.set_column(k, &v);
    }
    (values, vecs)
}

/// Haar-random orthogonal matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let neg = -q.column(j);
            q.set_column(j, &neg);
        }
    }
    q
}

pub fn random_unit_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}
