//! Small dense helpers on top of nalgebra for symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::Real;

/// `(M + M^T) / 2`.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Largest `|M_ij - M_ji|`.
pub fn symmetry_defect<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// Eigen-decomposition of the symmetric part of `m`.
pub fn sym_eigen<T: Real>(m: &DMatrix<T>) -> SymmetricEigen<T, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

/// `(lambda_min, lambda_max)` of the symmetric part of `m`.
pub fn eig_range<T: Real>(m: &DMatrix<T>) -> (T, T) {
    let eig = sym_eigen(m);
    let lo = eig.eigenvalues.iter().copied().fold(T::max_value().unwrap(), T::min);
    let hi = eig.eigenvalues.iter().copied().fold(T::min_value().unwrap(), T::max);
    (lo, hi)
}

pub fn lambda_min<T: Real>(m: &DMatrix<T>) -> T {
    eig_range(m).0
}

pub fn lambda_max<T: Real>(m: &DMatrix<T>) -> T {
    eig_range(m).1
}

/// Rebuilds `V diag(f(lambda)) V^T` from a symmetric eigen-decomposition.
pub fn spectral_map<T: Real>(eig: &SymmetricEigen<T, nalgebra::Dyn>, f: impl Fn(T) -> T) -> DMatrix<T> {
    let v = &eig.eigenvectors;
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let scaled = v * DMatrix::from_diagonal(&d);
    symmetrize(&(scaled * v.transpose()))
}

/// Positive semidefinite part of the symmetric matrix `m`.
pub fn positive_part<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    spectral_map(&sym_eigen(m), |l| l.max(T::zero()))
}

/// A symmetric matrix `X` with `X >= F` for every `F` in `family`.
///
/// Starts from the first member and adds the positive part of each
/// remaining excess: `X <- X + (F - X)_+`. Every step only adds a PSD term,
/// so earlier members stay dominated.
pub fn upper_bound<T: Real>(family: &[DMatrix<T>]) -> DMatrix<T> {
    let mut iter = family.iter();
    let mut x = symmetrize(iter.next().expect("non-empty family"));
    for f in iter {
        let excess = positive_part(&(f - &x));
        x = symmetrize(&(x + excess));
    }
    x
}

/// Quadratic form `x^T M x`.
pub fn quad<T: Real>(m: &DMatrix<T>, x: &DVector<T>) -> T {
    x.dot(&(m * x))
}

/// Inverse of a symmetric positive definite matrix via Cholesky, falling
/// back to LU for indefinite or numerically singular input.
pub fn sym_inverse<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    let s = symmetrize(m);
    if let Some(chol) = s.clone().cholesky() {
        return Some(symmetrize(&chol.inverse()));
    }
    s.lu().try_inverse().map(|inv| symmetrize(&inv))
}

/// Spectral radius of a general square matrix.
pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> T {
    m.complex_eigenvalues().iter().map(|c| (c.re * c.re + c.im * c.im).sqrt()).fold(T::zero(), T::max)
}

/// Parses a row-major nested vector into a matrix, rejecting ragged input.
pub fn from_rows<T: Real>(rows: &[Vec<T>]) -> Option<DMatrix<T>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_bound_dominates_each_member() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 3.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let x = upper_bound(&[a.clone(), b.clone(), c.clone()]);
        for f in [a, b, c] {
            assert!(lambda_min(&(&x - f)) > -1e-12);
        }
    }

    #[test]
    fn upper_bound_of_ordered_pair_is_the_larger() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::<f64>::identity(3, 3) * 2.0;
        let x = upper_bound(&[a, b.clone()]);
        assert!(max_abs(&(x - b)) < 1e-12);
    }

    #[test]
    fn spectral_radius_of_rotation_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius::<f64>(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_none());
    }
}
