//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub(crate) fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// (smallest eigenvalue, largest eigenvalue magnitude) of a symmetric matrix.
pub(crate) fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (lo, lo.abs().max(hi.abs())),
        _ => (f64::INFINITY, 0.0),
    }
}

/// Symmetric PSD square root. Eigenvalues at or below `cutoff * lambda_max`
/// are set to zero; taking the root of roundoff-level eigenvalues would
/// otherwise turn a 1e-16 residue into a 1e-8 one.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let top = eig.eigenvalues.max().max(0.0);
    let roots = eig.eigenvalues.map(|l| if l <= cutoff * top { 0.0 } else { l.sqrt() });
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&roots) * v.transpose()))
}

/// Singular values, descending.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Ratio sigma_r / sigma_max where r is the rank being tested (`rows` for row
/// rank, `cols` for column rank). Missing singular values count as zero.
pub(crate) fn rank_ratio(m: &DMatrix<f64>, required: usize) -> f64 {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    if required == 0 {
        return 1.0;
    }
    if max <= 0.0 || sv.len() < required {
        return 0.0;
    }
    sv[required - 1] / max
}

pub(crate) fn row_rank_ratio(m: &DMatrix<f64>) -> f64 {
    rank_ratio(m, m.nrows())
}

pub(crate) fn col_rank_ratio(m: &DMatrix<f64>) -> f64 {
    rank_ratio(m, m.ncols())
}

/// Solves `a x = b` for square `a` by column-pivoted QR, rejecting
/// numerically singular systems.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rank_tol: f64, what: &str) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::dim(
            "linear solve",
            format!("square system with {} rows", b.nrows()),
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    if rank_ratio(a, a.nrows()) <= rank_tol {
        return Err(Error::Numerical(format!("{what} is numerically singular")));
    }
    a.clone()
        .col_piv_qr()
        .solve(b)
        .ok_or_else(|| Error::Numerical(format!("{what} is numerically singular")))
}

pub(crate) fn inverse(a: &DMatrix<f64>, rank_tol: f64, what: &str) -> Result<DMatrix<f64>> {
    solve(a, &DMatrix::identity(a.nrows(), a.nrows()), rank_tol, what)
}

/// Solves `s x = b` for symmetric positive definite `s` via Cholesky.
pub(crate) fn spd_solve(s: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if s.nrows() == 0 {
        return Ok(b.clone());
    }
    let chol = symmetrize(s)
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))?;
    Ok(chol.solve(b))
}

/// Relative Frobenius error `|a - b| / |b|`; zero when both vanish.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff / scale
    }
}

/// Induced 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}
