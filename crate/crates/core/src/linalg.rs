//! Small dense linear-algebra helpers shared by the filter, sampler and solver.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative eigenvalue tolerance used when inverting or factoring PSD matrices.
pub const PSD_TOLERANCE: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest absolute entry, used to scale tolerances.
fn magnitude(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Factor `cov = L L'` for a symmetric PSD matrix.
///
/// Falls back to an eigen-decomposition when Cholesky fails (rank-deficient
/// input). Returns `None` if an eigenvalue is negative beyond tolerance.
pub fn psd_factor(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    psd_factor_tol(cov, 0.0)
}

/// As [`psd_factor`], additionally clipping eigenvalues above `-abs_tol`.
pub fn psd_factor_tol(cov: &DMatrix<f64>, abs_tol: f64) -> Option<DMatrix<f64>> {
    if cov.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Some(ch.l());
    }
    let scale = magnitude(cov).max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(symmetrize(cov));
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -(1e-8 * scale).max(abs_tol) {
            return None;
        }
        let s = lambda.max(0.0).sqrt();
        for i in 0..factor.nrows() {
            factor[(i, j)] *= s;
        }
    }
    Some(factor)
}

/// Draw from `N(mean, cov)`; always consumes exactly `mean.len()` normals.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    sample_mvn_tol(mean, cov, 0.0, rng)
}

/// As [`sample_mvn`], tolerating negative eigenvalues down to `-abs_tol`.
pub fn sample_mvn_tol<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    abs_tol: f64,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let factor = psd_factor_tol(cov, abs_tol)?;
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.sample(StandardNormal)));
    Some(mean + factor * z)
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn pinv_symmetric(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cutoff = tol * max_ev.max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lambda;
        }
    }
    out
}

/// Solve `a x = b` for symmetric `a`; Cholesky when PD, pseudo-inverse otherwise.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    match Cholesky::new(a.clone()) {
        Some(ch) => ch.solve(b),
        None => pinv_symmetric(a, PSD_TOLERANCE) * b,
    }
}

/// Log-determinant of a symmetric positive definite matrix.
pub fn log_det_spd(a: &DMatrix<f64>) -> Option<f64> {
    let ch = Cholesky::new(a.clone())?;
    Some(2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
}
