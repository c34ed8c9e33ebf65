//! Continuous Lyapunov equation `A X + X Aᵀ + Q = 0`.
//!
//! Primary route is Bartels–Stewart on the real Schur form of `A`; the
//! vectorized Kronecker system is kept as a fallback for small problems.

use nalgebra::{Schur, LU};

use crate::edge::ensure_hurwitz;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::tol::Tolerances;

/// Largest dimension for which the `m² × m²` Kronecker system is attempted.
pub const KRON_FALLBACK_MAX: usize = 50;

/// `‖A X + X Aᵀ + Q‖_F`.
pub fn residual(a: &Mat, x: &Mat, q: &Mat) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}

/// Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A` and symmetric `Q`.
pub fn solve_lyapunov(a: &Mat, q: &Mat, tol: &Tolerances) -> Result<Mat> {
    if !a.is_square() || a.shape() != q.shape() {
        return Err(Error::Dimension(format!("A is {:?}, Q is {:?}", a.shape(), q.shape())));
    }
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    ensure_hurwitz(a, tol)?;
    let x = linalg::symmetrize(&bartels_stewart(a, q)?);
    let bound = tol.lyapunov * (1.0 + x.norm());
    let res = residual(a, &x, q);
    if res <= bound {
        return Ok(x);
    }
    if a.nrows() <= KRON_FALLBACK_MAX {
        let x = linalg::symmetrize(&solve_lyapunov_kron(a, q)?);
        let res = residual(a, &x, q);
        let bound = tol.lyapunov * (1.0 + x.norm());
        if res <= bound {
            return Ok(x);
        }
        return Err(Error::SolveFailed { residual: res, bound });
    }
    Err(Error::SolveFailed { residual: res, bound })
}

/// Bartels–Stewart without residual checks.
pub fn bartels_stewart(a: &Mat, q: &Mat) -> Result<Mat> {
    let m = a.nrows();
    let (u, t) = Schur::new(a.clone()).unpack();
    // T Y + Y Tᵀ = C with Y = Uᵀ X U, C = -Uᵀ Q U.
    let c = -(u.transpose() * q * &u);
    let mut y = Mat::zeros(m, m);

    let mut blocks = Vec::new();
    let mut i = 0;
    while i < m {
        if i + 1 < m && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    // (Y Tᵀ)[:, j] = Σ_{l ≥ j} Y[:, l] T[j, l], so sweep column blocks right to left.
    for &(j, sz) in blocks.iter().rev() {
        let mut rhs = c.columns(j, sz).into_owned();
        if j + sz < m {
            let tail = m - j - sz;
            let coupling = t.view((j, j + sz), (sz, tail)).transpose();
            rhs -= y.columns(j + sz, tail) * coupling;
        }
        let s = t.view((j, j), (sz, sz)).into_owned();
        // T Y_j + Y_j Sᵀ = rhs  ⇔  (I ⊗ T + S ⊗ I) vec(Y_j) = vec(rhs)
        let sys = Mat::identity(sz, sz).kronecker(&t) + s.kronecker(&Mat::identity(m, m));
        let vec_rhs = Mat::from_column_slice(m * sz, 1, rhs.as_slice());
        let sol = LU::new(sys).solve(&vec_rhs).ok_or(Error::SolveFailed { residual: f64::INFINITY, bound: 0.0 })?;
        y.columns_mut(j, sz).copy_from(&Mat::from_column_slice(m, sz, sol.as_slice()));
    }
    Ok(&u * y * u.transpose())
}

/// Solves `(I ⊗ A + A ⊗ I) vec(X) = -vec(Q)` directly.
pub fn solve_lyapunov_kron(a: &Mat, q: &Mat) -> Result<Mat> {
    let m = a.nrows();
    let eye = Mat::identity(m, m);
    let sys = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = Mat::from_column_slice(m * m, 1, (-q).as_slice());
    let sol = LU::new(sys).solve(&rhs).ok_or(Error::SolveFailed { residual: f64::INFINITY, bound: 0.0 })?;
    Ok(Mat::from_column_slice(m, m, sol.as_slice()))
}
