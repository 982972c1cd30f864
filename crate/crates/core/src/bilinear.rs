//! Bilinear forms with values in a Euclidean space.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    kernel_subspace, numerical_rank, random_unit_vector, range_subspace, spectral_norm, Subspace,
    DEFAULT_TOL,
};

/// Default relative flatness threshold.
pub const FLAT_TOL: f64 = 1e-8;

/// `beta: R^left x R^right -> R^target`, stored as one `left x right` matrix
/// per target component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearForm {
    pub dim_left: usize,
    pub dim_right: usize,
    pub dim_target: usize,
    pub components: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularElement {
    pub vector: DVector<f64>,
    pub rank: usize,
}

impl BilinearForm {
    pub fn zero(dim_left: usize, dim_right: usize, dim_target: usize) -> Self {
        Self {
            dim_left,
            dim_right,
            dim_target,
            components: vec![DMatrix::zeros(dim_left, dim_right); dim_target],
        }
    }

    /// Builds the form from its values on basis pairs.
    pub fn from_fn(
        dim_left: usize,
        dim_right: usize,
        dim_target: usize,
        mut f: impl FnMut(usize, usize) -> DVector<f64>,
    ) -> Self {
        let mut b = Self::zero(dim_left, dim_right, dim_target);
        for i in 0..dim_left {
            for j in 0..dim_right {
                let v = f(i, j);
                for (k, c) in b.components.iter_mut().enumerate() {
                    c[(i, j)] = v[k];
                }
            }
        }
        b
    }

    pub fn value(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim_target, self.components.iter().map(|c| c[(i, j)]))
    }

    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim_target,
            self.components.iter().map(|c| x.dot(&(c * y))),
        )
    }

    /// Matrix of `X -> beta(X, z)`, `target x left`.
    pub fn beta_z(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim_target, self.dim_left);
        for (k, c) in self.components.iter().enumerate() {
            m.set_row(k, &(c * z).transpose());
        }
        m
    }

    /// Largest value norm over basis pairs.
    pub fn max_norm(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim_left {
            for j in 0..self.dim_right {
                worst = worst.max(self.value(i, j).norm());
            }
        }
        worst
    }

    /// `(x, y) -> t^T beta(l x, r y)` for orthogonal changes of basis.
    pub fn transform(&self, l: &DMatrix<f64>, r: &DMatrix<f64>, t: &DMatrix<f64>) -> Self {
        let rotated: Vec<DMatrix<f64>> = self
            .components
            .iter()
            .map(|c| l.transpose() * c * r)
            .collect();
        let components = (0..self.dim_target)
            .map(|k| {
                let mut acc = DMatrix::zeros(self.dim_left, self.dim_right);
                for (m, c) in rotated.iter().enumerate() {
                    acc += c * t[(m, k)];
                }
                acc
            })
            .collect();
        Self {
            components,
            ..self.clone()
        }
    }

    /// Restriction to subspaces given by orthonormal column bases.
    pub fn restrict(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Self {
        Self {
            dim_left: left.ncols(),
            dim_right: right.ncols(),
            dim_target: self.dim_target,
            components: self
                .components
                .iter()
                .map(|c| left.transpose() * c * right)
                .collect(),
        }
    }

    /// Matrix of `X -> beta(X, .)`, one column per left basis vector.
    pub fn left_matrix(&self) -> DMatrix<f64> {
        let r = self.dim_right;
        DMatrix::from_fn(self.dim_target * r, self.dim_left, |row, i| {
            self.components[row / r][(i, row % r)]
        })
    }
}

/// Unnormalized flatness defect over basis 4-tuples.
pub fn flatness_defect(b: &BilinearForm) -> f64 {
    let vals: Vec<Vec<DVector<f64>>> = (0..b.dim_left)
        .map(|i| (0..b.dim_right).map(|j| b.value(i, j)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for x in 0..b.dim_left {
        for z in 0..b.dim_left {
            for y in 0..b.dim_right {
                for w in 0..b.dim_right {
                    let d = vals[x][y].dot(&vals[z][w]) - vals[x][w].dot(&vals[z][y]);
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    worst
}

/// Flatness defect normalized by the squared largest value norm; 0 for the
/// zero form.
pub fn flatness_residual(b: &BilinearForm) -> f64 {
    let scale = b.max_norm();
    if scale == 0.0 {
        return 0.0;
    }
    flatness_defect(b) / (scale * scale)
}

/// Best of the right basis vectors and `trials` seeded random unit vectors.
///
/// Candidates are ranked by the rank of `beta^Z`, then by the smallest
/// retained singular value so that the kernel of the winner is well separated.
pub fn find_regular_element(b: &BilinearForm, trials: usize, seed: u64) -> RegularElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<DVector<f64>> = (0..b.dim_right)
        .map(|j| {
            let mut e = DVector::zeros(b.dim_right);
            e[j] = 1.0;
            e
        })
        .collect();
    if b.dim_right > 0 {
        candidates.extend((0..trials.max(1)).map(|_| random_unit_vector(b.dim_right, &mut rng)));
    }
    let mut best = RegularElement {
        vector: DVector::zeros(b.dim_right),
        rank: 0,
    };
    let mut best_gap = 0.0;
    for z in candidates {
        let m = b.beta_z(&z);
        let rank = numerical_rank(&m, DEFAULT_TOL);
        let gap = if rank == 0 {
            0.0
        } else {
            let mut sv: Vec<f64> = m.singular_values().iter().cloned().collect();
            sv.sort_by(|a, c| c.total_cmp(a));
            sv[rank - 1]
        };
        if best.vector.iter().all(|v| *v == 0.0)
            || rank > best.rank
            || (rank == best.rank && gap > best_gap)
        {
            best = RegularElement { vector: z, rank };
            best_gap = gap;
        }
    }
    best
}

/// Left nullity of a flat form as the kernel of `beta^Z` at a regular element.
pub fn moore_nullity(b: &BilinearForm, reg: &RegularElement, flat_tol: f64) -> Result<Subspace> {
    let residual = flatness_residual(b);
    if !(residual < flat_tol) {
        return Err(Error::NonFlat {
            residual,
            threshold: flat_tol,
        });
    }
    if b.dim_right == 0 {
        return Ok(Subspace::full(b.dim_left, DEFAULT_TOL));
    }
    Ok(kernel_subspace(&b.beta_z(&reg.vector), DEFAULT_TOL))
}

/// Brute-force left nullity: the intersection of the kernels of `beta^(f_j)`.
pub fn nullity_brute_force(b: &BilinearForm, tol: f64) -> Subspace {
    kernel_subspace(&b.left_matrix(), tol)
}

/// Span of all values.
pub fn span_of(b: &BilinearForm) -> Subspace {
    let mut cols = DMatrix::zeros(b.dim_target, b.dim_left * b.dim_right);
    for i in 0..b.dim_left {
        for j in 0..b.dim_right {
            cols.set_column(i * b.dim_right + j, &b.value(i, j));
        }
    }
    range_subspace(&cols, DEFAULT_TOL)
}

/// One pair of the diagonal decomposition of a flat symmetric form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPair {
    pub z: DVector<f64>,
    pub rho: DVector<f64>,
}

const DIAG_TOL: f64 = 1e-8;
const DIAG_ATTEMPTS: usize = 24;

/// Vectors `Z_i` orthogonal to `nullity` with `b(Z_i, Z_j) = 0` for `i != j`
/// and `rho_i = b(Z_i, Z_i)` orthonormal.
///
/// On the complement of the nullity the form is diagonal in a common basis,
/// so every shape operator `A_xi = <b, xi>` is congruent to a diagonal matrix
/// in that basis. The basis is recovered from the pencil `(A_xi2, A_xi1)` of
/// two random target directions; the pencil is redrawn when it is close to
/// singular or has nearly repeated eigenvalues.
pub fn moore_diagonalize(b_sym: &BilinearForm, nullity: &Subspace) -> Result<Vec<DiagonalPair>> {
    if b_sym.dim_left != b_sym.dim_right {
        return Err(Error::DimensionMismatch("form is not square".into()));
    }
    let sym_defect = b_sym
        .components
        .iter()
        .map(|c| (c - c.transpose()).amax())
        .fold(0.0, f64::max);
    let scale = b_sym.max_norm();
    if scale == 0.0 {
        return Ok(Vec::new());
    }
    if sym_defect > DIAG_TOL * scale {
        return Err(Error::Diagonalization(sym_defect / scale));
    }
    let residual = flatness_residual(b_sym);
    if !(residual < FLAT_TOL) {
        return Err(Error::NonFlat {
            residual,
            threshold: FLAT_TOL,
        });
    }
    let complement = nullity.complement();
    let q = complement.dim();
    let reduced = b_sym.restrict(&complement.basis, &complement.basis);
    let span = span_of(&reduced);
    if span.dim() != q {
        return Err(Error::Diagonalization(1.0));
    }
    if q == 0 {
        return Ok(Vec::new());
    }
    // work in an orthonormal basis of the value span
    let forms: Vec<DMatrix<f64>> = (0..q)
        .map(|k| {
            let mut acc = DMatrix::zeros(q, q);
            for (m, c) in reduced.components.iter().enumerate() {
                acc += c * span.basis[(m, k)];
            }
            acc / scale
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = f64::INFINITY;
    for _ in 0..DIAG_ATTEMPTS {
        let xi1 = random_unit_vector(q, &mut rng);
        let xi2 = random_unit_vector(q, &mut rng);
        let combine = |xi: &DVector<f64>| {
            let mut acc = DMatrix::zeros(q, q);
            for (k, f) in forms.iter().enumerate() {
                acc += f * xi[k];
            }
            acc
        };
        let (a1, a2) = (combine(&xi1), combine(&xi2));
        let Some(zs) = pencil_eigenvectors(&a1, &a2) else {
            continue;
        };
        let pairs: Vec<DiagonalPair> = zs
            .iter()
            .map(|zq| {
                let z = &complement.basis * zq;
                let rho = b_sym.apply(&z, &z);
                let s = rho.norm().sqrt();
                DiagonalPair {
                    z: z / s,
                    rho: rho / (s * s),
                }
            })
            .collect();
        let defect = diagonal_defect(b_sym, &pairs);
        if defect < DIAG_TOL {
            return Ok(pairs);
        }
        worst = worst.min(defect);
    }
    Err(Error::Diagonalization(worst))
}

/// Largest off-diagonal value norm and deviation of the `rho_i` from an
/// orthonormal set.
pub fn diagonal_defect(b: &BilinearForm, pairs: &[DiagonalPair]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in pairs.iter().enumerate() {
        for (j, c) in pairs.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.rho.dot(&c.rho) - target).abs());
            if i != j {
                worst = worst.max(b.apply(&a.z, &c.z).norm());
            }
        }
    }
    worst
}

/// Eigenvectors of `A1^{-1} A2` when the pencil is well conditioned.
fn pencil_eigenvectors(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Option<Vec<DVector<f64>>> {
    let q = a1.nrows();
    let sv = a1.clone().singular_values();
    let smax = sv.max();
    if sv.min() < 1e-4 * smax.max(1e-300) {
        return None;
    }
    let m = a1.clone().lu().solve(a2)?;
    let t = m.clone().try_schur(1e-14, 10_000)?.unpack().1;
    let mut lambdas: Vec<f64> = (0..q).map(|i| t[(i, i)]).collect();
    lambdas.sort_by(f64::total_cmp);
    let spread = lambdas.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if lambdas.windows(2).any(|w| w[1] - w[0] < 1e-3 * spread) {
        return None;
    }
    let mut out = Vec::with_capacity(q);
    for lambda in lambdas {
        let shifted = a2 - a1 * lambda;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))?;
        out.push(vt.row(imin).transpose());
    }
    Some(out)
}

/// Spectral distance of the Gram matrix of the `rho_i` from the identity.
pub fn rho_orthonormality(pairs: &[DiagonalPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let m = pairs[0].rho.len();
    let mut r = DMatrix::zeros(m, pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        r.set_column(i, &p.rho);
    }
    spectral_norm(&(r.transpose() * &r - DMatrix::identity(pairs.len(), pairs.len())))
}
