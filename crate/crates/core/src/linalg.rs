//! Complex dense linear-algebra helpers shared by the rate evaluators and
//! the minorant builders.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Maximum relative deviation from Hermitian symmetry accepted before
/// a matrix is symmetrized and factored.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn scaled_identity(n: usize, scale: f64) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, C64::new(scale, 0.0))
}

/// Relative Frobenius distance between `m` and its conjugate transpose.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Average of `m` with its conjugate transpose.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn checked_hermitian(m: &CMatrix, what: &str) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what}: non-finite entries")));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: Hermitian deviation {dev:.3e} exceeds {HERMITIAN_TOL:e}"
        )));
    }
    Ok(hermitize(m))
}

pub fn cholesky(m: &CMatrix, what: &str) -> Result<Cholesky<C64, Dyn>> {
    let h = checked_hermitian(m, what)?;
    let chol = Cholesky::new(h).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    // The complex square root never fails, so a negative pivot shows up as
    // an imaginary diagonal entry instead of a `None`.
    let pivots_ok = chol.l_dirty().diagonal().iter().all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re);
    if !pivots_ok {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(chol)
}

/// `ln |M|` for a Hermitian positive definite `M`.
pub fn log_det_pd(m: &CMatrix, what: &str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
}

pub fn inverse_pd(m: &CMatrix, what: &str) -> Result<CMatrix> {
    let chol = cholesky(m, what)?;
    Ok(hermitize(&chol.inverse()))
}

/// `ln |I + Bᴴ M⁻¹ B|`, the Shannon rate of signal `B` against the
/// interference-plus-noise covariance `M`.
pub fn rate_log_det(signal: &CMatrix, interference: &CMatrix) -> Result<f64> {
    let chol = cholesky(interference, "interference covariance")?;
    let w = chol
        .l_dirty()
        .clone()
        .solve_lower_triangular(signal)
        .ok_or_else(|| Error::NotPositiveDefinite("interference covariance".into()))?;
    let gram = identity(signal.ncols()) + w.adjoint() * &w;
    log_det_pd(&gram, "rate Gram matrix")
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Factor `W` with `W Wᴴ ≈ M` for Hermitian PSD `M`; eigen-directions whose
/// eigenvalue is below `tol · λ_max` are dropped, so `W` may have fewer
/// columns than `M`.
pub fn psd_factor(m: &CMatrix, tol: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let top = values.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > tol * top && values[k] > 0.0)
        .collect();
    let mut w = zeros(m.nrows(), keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        let scale = values[k].sqrt();
        w.set_column(dst, &vectors.column(k).map(|z| z * scale));
    }
    w
}

/// Principal square root of a Hermitian PSD matrix.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    hermitize(&(&vectors * diag * vectors.adjoint()))
}

/// `⟨A, B⟩ = tr(Aᴴ B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Real embedding `[[Re M, -Im M], [Im M, Re M]]`.
pub fn realify(m: &CMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Matrix with i.i.d. circularly-symmetric unit-variance complex Gaussian entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// The `count` dominant right singular vectors of `h`, as orthonormal columns.
pub fn dominant_right_singular_vectors(h: &CMatrix, count: usize) -> CMatrix {
    let gram = h.adjoint() * h;
    let (_, vectors) = hermitian_eigen(&gram);
    let n = vectors.ncols();
    let mut out = zeros(h.ncols(), count);
    for k in 0..count.min(n) {
        out.set_column(k, &vectors.column(n - 1 - k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = complex_gaussian(rng, n, n + 2);
        &a * a.adjoint() + scaled_identity(n, 0.1)
    }

    #[test]
    fn rate_log_det_matches_identity_case() {
        // BᴴB = diag(1,1) with unit noise gives ln|2I| = 2 ln 2.
        let b = identity(2);
        let rate = rate_log_det(&b, &identity(2)).unwrap();
        assert!((rate - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rate_log_det_is_log_det_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_pd(&mut rng, 3);
        let b = complex_gaussian(&mut rng, 3, 2);
        let full = &m + &b * b.adjoint();
        let expected = log_det_pd(&full, "f").unwrap() - log_det_pd(&m, "m").unwrap();
        assert!((rate_log_det(&b, &m).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = identity(2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(log_det_pd(&m, "m"), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn indefinite_input_is_rejected() {
        let m = scaled_identity(2, -1.0);
        assert!(log_det_pd(&m, "m").is_err());
    }

    #[test]
    fn factor_and_sqrt_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_pd(&mut rng, 4);
        let w = psd_factor(&m, 1e-12);
        assert!((&w * w.adjoint() - &m).norm() < 1e-9 * m.norm());
        let s = psd_sqrt(&m);
        assert!((&s * &s - &m).norm() < 1e-9 * m.norm());
    }

    #[test]
    fn realify_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_pd(&mut rng, 3);
        let r = realify(&m);
        let real_min = nalgebra::SymmetricEigen::new(r).eigenvalues.min();
        assert!((real_min - min_eigenvalue(&m)).abs() < 1e-9);
    }

    #[test]
    fn dominant_vectors_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = complex_gaussian(&mut rng, 2, 4);
        let v = dominant_right_singular_vectors(&h, 2);
        assert!((v.adjoint() * &v - identity(2)).norm() < 1e-10);
    }
}
