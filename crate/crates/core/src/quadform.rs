//! Closed-form maximization of the indefinite quadratics
//!
//! ```text
//! max_v |v|^2_P - gamma^2 |y - v|^2                          (single)
//! max_v |v|^2_T - gamma^2 |y1 - v|^2 / 2 - gamma^2 |y2 - v|^2 / 2   (pair)
//! ```
//!
//! Both are finite exactly when `P < gamma^2 I`, with value
//! `|y|^2_G`, `G = (P^-1 - gamma^-2 I)^-1`, attained at
//! `v* = (I - gamma^-2 P)^-1 y`. The pair form reduces to the single form at
//! the midpoint `(y1 + y2) / 2` minus `gamma^2 |(y1 - y2) / 2|^2`.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};

use crate::linalg::{self, spectral_map};
use crate::{Error, Real, Result};

/// Attenuation level `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Gamma<T>(T);

impl<T: Real> Gamma<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if gamma > T::zero() && gamma.is_finite() {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidInput(format!("gamma must be positive and finite, got {gamma}")))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    #[inline]
    pub fn squared(self) -> T {
        self.0 * self.0
    }

    /// Margin used for strict definiteness checks, `1e-9 (1 + gamma^2)`.
    #[inline]
    pub fn definiteness_tol(self) -> T {
        T::tol(1e-9) * (T::one() + self.squared())
    }
}

/// Result of a closed-form maximization: optimal value and maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMax<T: Real> {
    pub value: T,
    pub vstar: DVector<T>,
}

/// An admissible form `0 < P < gamma^2 I` together with its
/// eigen-decomposition, so repeated maximizations reuse one factorization.
#[derive(Debug, Clone)]
pub struct GammaForm<T: Real> {
    p: DMatrix<T>,
    gamma: Gamma<T>,
    eig: SymmetricEigen<T, Dyn>,
}

impl<T: Real> GammaForm<T> {
    /// Symmetrizes `p` and checks `0 < P < gamma^2 I` by eigenvalues.
    pub fn new(p: &DMatrix<T>, gamma: Gamma<T>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::Dimension(format!("form is {}x{}", p.nrows(), p.ncols())));
        }
        let p = linalg::symmetrize(p);
        let eig = SymmetricEigen::new(p.clone());
        let tol = gamma.definiteness_tol();
        let mut lo = T::max_value().unwrap();
        let mut hi = T::min_value().unwrap();
        for &l in eig.eigenvalues.iter() {
            if !l.is_finite() {
                return Err(Error::NotContractive { lambda_max: f64::INFINITY, gamma_sq: gamma.squared().as_f64() });
            }
            lo = lo.min(l);
            hi = hi.max(l);
        }
        if hi >= gamma.squared() - tol {
            return Err(Error::NotContractive { lambda_max: hi.as_f64(), gamma_sq: gamma.squared().as_f64() });
        }
        if lo <= T::tol(1e-12) * (T::one() + hi) {
            return Err(Error::NotPositive { lambda_min: lo.as_f64() });
        }
        Ok(Self { p, gamma, eig })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.p
    }

    pub fn gamma(&self) -> Gamma<T> {
        self.gamma
    }

    /// `G = (P^-1 - gamma^-2 I)^-1 = V diag(l / (1 - l / gamma^2)) V^T`.
    pub fn transform(&self) -> DMatrix<T> {
        let g2 = self.gamma.squared();
        spectral_map(&self.eig, |l| l / (T::one() - l / g2))
    }

    /// `(I - gamma^-2 P)^-1 y`.
    pub fn amplify(&self, y: &DVector<T>) -> DVector<T> {
        let g2 = self.gamma.squared();
        let v = &self.eig.eigenvectors;
        let mut coeffs = v.transpose() * y;
        for (c, &l) in coeffs.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *c /= T::one() - l / g2;
        }
        v * coeffs
    }

    /// `max_v |v|^2_P - gamma^2 |y - v|^2`.
    pub fn max_single(&self, y: &DVector<T>) -> QuadMax<T> {
        let vstar = self.amplify(y);
        // y^T G y = y^T P v*, with G = P (I - gamma^-2 P)^-1.
        let value = y.dot(&(&self.p * &vstar));
        QuadMax { value, vstar }
    }

    /// `max_v |v|^2_T - gamma^2 |y1 - v|^2 / 2 - gamma^2 |y2 - v|^2 / 2`.
    pub fn max_pair(&self, y1: &DVector<T>, y2: &DVector<T>) -> QuadMax<T> {
        let half = T::lit(0.5);
        let mid = (y1 + y2) * half;
        let diff = (y1 - y2) * half;
        let single = self.max_single(&mid);
        QuadMax { value: single.value - self.gamma.squared() * diff.norm_squared(), vstar: single.vstar }
    }
}

/// `G = (P^-1 - gamma^-2 I)^-1`, requiring `0 < P < gamma^2 I`.
pub fn gamma_transform<T: Real>(p: &DMatrix<T>, gamma: Gamma<T>) -> Result<DMatrix<T>> {
    Ok(GammaForm::new(p, gamma)?.transform())
}

pub fn max_quad_single<T: Real>(p: &DMatrix<T>, gamma: Gamma<T>, y: &DVector<T>) -> Result<QuadMax<T>> {
    check_len(p, y)?;
    Ok(GammaForm::new(p, gamma)?.max_single(y))
}

pub fn max_quad_pair<T: Real>(t: &DMatrix<T>, gamma: Gamma<T>, y1: &DVector<T>, y2: &DVector<T>) -> Result<QuadMax<T>> {
    check_len(t, y1)?;
    check_len(t, y2)?;
    Ok(GammaForm::new(t, gamma)?.max_pair(y1, y2))
}

/// The objective `|v|^2_P - gamma^2 |y - v|^2` maximized by [`max_quad_single`].
pub fn single_objective<T: Real>(p: &DMatrix<T>, gamma: Gamma<T>, y: &DVector<T>, v: &DVector<T>) -> T {
    linalg::quad(p, v) - gamma.squared() * (y - v).norm_squared()
}

/// The objective maximized by [`max_quad_pair`].
pub fn pair_objective<T: Real>(t: &DMatrix<T>, gamma: Gamma<T>, y1: &DVector<T>, y2: &DVector<T>, v: &DVector<T>) -> T {
    let half = T::lit(0.5);
    linalg::quad(t, v) - gamma.squared() * half * ((y1 - v).norm_squared() + (y2 - v).norm_squared())
}

fn check_len<T: Real>(p: &DMatrix<T>, y: &DVector<T>) -> Result<()> {
    if p.nrows() == y.len() {
        Ok(())
    } else {
        Err(Error::Dimension(format!("form is {}x{}, vector has length {}", p.nrows(), p.ncols(), y.len())))
    }
}
