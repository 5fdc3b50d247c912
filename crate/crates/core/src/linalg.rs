//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// 2-norm condition number from the singular values (`∞` when singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `(a + a^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Moore–Penrose inverse of a symmetric matrix through its eigendecomposition,
/// discarding eigenvalues below `rel_tol * max |eigenvalue|`. Returns the rank kept.
pub fn sym_pinv(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let eig = symmetrize(a).symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_tol * max;
    let mut inv = DMatrix::zeros(a.nrows(), a.ncols());
    let mut rank = 0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > cut && lam != 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / lam;
        }
    }
    (inv, rank)
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::Singular {
            what,
            condition: condition_number(a),
        }),
    }
}

/// Inverse of a symmetric positive definite matrix by Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(symmetrize(&ch.inverse())),
        None => Err(Error::Singular {
            what,
            condition: condition_number(a),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let a = &v * v.transpose();
        let (p, rank) = sym_pinv(&a, 1e-10);
        assert_eq!(rank, 1);
        let back = &a * &p * &a;
        assert!((back - &a).norm() < 1e-12);
    }

    #[test]
    fn spd_helpers() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x = spd_solve(&a, &DVector::from_vec(vec![1.0, 2.0]), "a").unwrap();
        assert!((&a * x - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-14);
        let inv = spd_inverse(&a, "a").unwrap();
        assert!((&a * inv - DMatrix::identity(2, 2)).norm() < 1e-14);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_inverse(&sing, "s"), Err(Error::Singular { .. })));
        assert!(condition_number(&sing) > 1e15);
    }
}
