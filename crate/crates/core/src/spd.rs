//! Symmetric and symmetric positive definite matrices, and the
//! affine-invariant Riemannian distance between SPD matrices.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{eig_extremes, sym_eigenvalues, symmetrize};
use crate::tol::Tolerances;

/// A real symmetric matrix. Symmetry is exact: construction replaces the
/// input by `(M + M')/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m`. Fails if `m` is not square.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(
                "SymMatrix::new",
                "square matrix",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(SymMatrix(symmetrize(&m)))
    }

    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        SymMatrix(symmetrize(&m))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        SymMatrix(DMatrix::identity(n, n) * s)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_extremes(&self.0).0
    }

    /// PSD within `tol` relative to the spectral radius.
    pub fn is_psd(&self, tol: f64) -> bool {
        let (lo, radius) = eig_extremes(&self.0);
        lo >= -tol * radius.max(1.0)
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl From<SpdMatrix> for SymMatrix {
    fn from(s: SpdMatrix) -> Self {
        s.base
    }
}

/// Outcome of [`is_spd`]: the verdict together with the smallest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdCheck {
    pub is_spd: bool,
    pub min_eig: f64,
    pub spectral_radius: f64,
}

/// True iff the smallest eigenvalue exceeds `tol * max(1, spectral radius)`.
pub fn is_spd(m: &SymMatrix, tol: f64) -> SpdCheck {
    let (min_eig, spectral_radius) = eig_extremes(m.as_matrix());
    SpdCheck {
        is_spd: m.dim() > 0 && min_eig > tol * spectral_radius.max(1.0),
        min_eig,
        spectral_radius,
    }
}

/// A symmetric positive definite matrix with its smallest eigenvalue cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
    min_eig: f64,
}

impl SpdMatrix {
    /// Validates `m` with the default tolerances.
    pub fn new(m: SymMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: SymMatrix, tol: &Tolerances) -> Result<Self> {
        let check = is_spd(&m, tol.pd);
        if !check.is_spd {
            return Err(Error::Argument(format!(
                "matrix is not positive definite (smallest eigenvalue {:e})",
                check.min_eig
            )));
        }
        Ok(SpdMatrix {
            base: m,
            min_eig: check.min_eig,
        })
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::new(m)?)
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.base.as_matrix()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}

impl Deref for SpdMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.base
    }
}

/// Affine-invariant Riemannian distance `sqrt(sum log^2 lambda_i)` where
/// `lambda_i` are the eigenvalues of `U V^{-1}`.
///
/// The eigenvalues are taken from the symmetric whitened matrix
/// `L^{-1} U L^{-T}` with `V = L L'`, which shares the spectrum of `U V^{-1}`.
/// Since swapping the arguments only inverts the spectrum, the better
/// conditioned of the two is always the one factored; the choice does not
/// depend on argument order, so the result is exactly symmetric.
pub fn riemannian_distance(u: &SpdMatrix, v: &SpdMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::dim("riemannian_distance", u.dim(), v.dim()));
    }
    let (u, v) = if whitens_better(u, v) { (v, u) } else { (u, v) };
    let chol = v
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Cholesky factorization of V failed".into()))?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(u.as_matrix())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut acc = 0.0;
    for lambda in sym_eigenvalues(&symmetrize(&whitened)) {
        if lambda <= 0.0 {
            return Err(Error::Numerical(format!(
                "non-positive generalized eigenvalue {lambda:e}"
            )));
        }
        acc += lambda.ln().powi(2);
    }
    Ok(acc.sqrt())
}

/// True if `u` should be factored instead of `v`: smaller condition number,
/// ties broken by comparing entries so that the choice is order-independent.
fn whitens_better(u: &SpdMatrix, v: &SpdMatrix) -> bool {
    let cond = |m: &SpdMatrix| {
        let (lo, hi) = eig_extremes(m.as_sym());
        hi / lo
    };
    match cond(u).partial_cmp(&cond(v)) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        _ => u.as_matrix().iter().partial_cmp(v.as_matrix().iter()) == Some(std::cmp::Ordering::Less),
    }
}

/// Deterministic random SPD matrix `O diag(lambda) O'` with a Haar-like
/// orthogonal factor and log-uniform eigenvalues in `[1, cond_max]`.
pub fn random_spd(dim: usize, seed: u64, cond_max: f64) -> Result<SpdMatrix> {
    if dim == 0 {
        return Err(Error::Argument("dim must be at least 1".into()));
    }
    if !(cond_max >= 1.0) || !cond_max.is_finite() {
        return Err(Error::Argument(format!(
            "cond_max must be finite and >= 1, got {cond_max}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_spd_with(&mut rng, dim, cond_max))
}

pub(crate) fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes the factor uniformly distributed
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub(crate) fn random_spd_with<R: Rng + ?Sized>(rng: &mut R, dim: usize, cond_max: f64) -> SpdMatrix {
    let o = random_orthogonal(rng, dim);
    let log_cond = cond_max.ln();
    let scale = rng.random_range(-1.0..1.0f64).exp();
    let eig: Vec<f64> = (0..dim)
        .map(|_| scale * (rng.random::<f64>() * log_cond).exp())
        .collect();
    let m = if log_cond == 0.0 {
        DMatrix::identity(dim, dim) * scale
    } else {
        &o * DMatrix::from_diagonal(&DVector::from_vec(eig)) * o.transpose()
    };
    let base = SymMatrix::from_symmetric_unchecked(m);
    let min_eig = base.min_eigenvalue();
    SpdMatrix { base, min_eig }
}
