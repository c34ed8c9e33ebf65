//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// `A ⊗ B`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// `A ⊗ I_k`.
pub fn kron_eye(a: &Mat, k: usize) -> Mat {
    a.kronecker(&Mat::identity(k, k))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Symmetric and strictly positive definite, up to a relative symmetry slack.
pub fn is_spd(m: &Mat) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    asymmetry(m) <= 1e-12 * scale && min_eig(m) > 0.0
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_fn(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&v| f(v)));
    let q = &eig.eigenvectors;
    symmetrize(&(q * Mat::from_diagonal(&d) * q.transpose()))
}

/// Principal square root of a symmetric PSD matrix (negative round-off clipped).
pub fn sym_sqrt(m: &Mat) -> Mat {
    sym_fn(m, |v| v.max(0.0).sqrt())
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(symmetrize(m)).ok_or(Error::NonPd)?;
    Ok(symmetrize(&chol.inverse()))
}

/// Solves `M X = B` for SPD `M`.
pub fn spd_solve(m: &Mat, b: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(symmetrize(m)).ok_or(Error::NonPd)?;
    Ok(chol.solve(b))
}

/// Reciprocal 2-norm condition estimate of a symmetric matrix.
pub fn sym_rcond(m: &Mat) -> f64 {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn max_real_eig(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Block-diagonal assembly of square blocks (possibly of different sizes).
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(dim, dim);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// The `idx`-th `k×k` diagonal block.
pub fn diag_block(m: &Mat, idx: usize, k: usize) -> Mat {
    m.view((idx * k, idx * k), (k, k)).into_owned()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

/// 2-norm of a matrix (largest singular value).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_sqrt(&m);
        assert!((&r * &r - &m).amax() < 1e-12);
    }

    #[test]
    fn indefinite_is_not_spd() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_spd(&m));
        assert!(spd_inverse(&m).is_err());
    }

    #[test]
    fn kron_eye_matches_kron() {
        let a = Mat::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(kron_eye(&a, 2), kron(&a, &Mat::identity(2, 2)));
    }

    #[test]
    fn block_diag_layout() {
        let a = Mat::from_element(1, 1, 2.0);
        let b = Mat::identity(2, 2);
        let m = block_diag(&[&a, &b]);
        assert_eq!(m.nrows(), 3);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(2, 2)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(diag_block(&m, 1, 1)[(0, 0)], 1.0);
    }
}
