//! Per-model H-infinity Riccati equations solved by monotone value iteration,
//! and the state realization of input-output models.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, lambda_max, lambda_min, max_abs, symmetry_defect};
use crate::quadform::{Gamma, GammaForm};
use crate::{Error, Real, Result};

/// Cost weights and attenuation level of the game payoff
/// `|x|^2_Q + |u|^2_R - gamma^2 |w|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub gamma: Gamma<T>,
}

impl<T: Real> GameSpec<T> {
    /// Validates `Q > 0`, `R > 0` (both symmetric) and `gamma > 0`.
    pub fn new(q: DMatrix<T>, r: DMatrix<T>, gamma: T) -> Result<Self> {
        let gamma = Gamma::new(gamma)?;
        for (name, m) in [("Q", &q), ("R", &r)] {
            if !m.is_square() || m.nrows() == 0 {
                return Err(Error::Dimension(format!("{name} is {}x{}", m.nrows(), m.ncols())));
            }
            if symmetry_defect(m) > T::tol(1e-12) * (T::one() + max_abs(m)) {
                return Err(Error::InvalidInput(format!("{name} is not symmetric")));
            }
            let lo = lambda_min(m);
            if lo <= T::zero() {
                return Err(Error::InvalidInput(format!("{name} is not positive definite (lambda_min = {lo})")));
            }
        }
        Ok(Self { q: linalg::symmetrize(&q), r: linalg::symmetrize(&r), gamma })
    }

    /// Same weights at a different attenuation level.
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Ok(Self { q: self.q.clone(), r: self.r.clone(), gamma: Gamma::new(gamma)? })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions<T> {
    /// Stop when `max |P_{k+1} - P_k| <= tol`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for RiccatiOptions<T> {
    fn default() -> Self {
        Self { tol: T::tol(1e-10), max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution<T: Real> {
    pub p: DMatrix<T>,
    /// Minimizing feedback, `u = -K x`.
    pub k: DMatrix<T>,
    pub iterations: usize,
    /// `max |P - RHS(P)|` at the returned `P`.
    pub residual: T,
}

/// One step of the game Riccati map:
/// `P -> Q + A^T G A - A^T G B (R + B^T G B)^-1 B^T G A`, `G = (P^-1 - gamma^-2 I)^-1`.
///
/// Returns the new iterate and the gain `K = (R + B^T G B)^-1 B^T G A`.
pub fn riccati_step<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &GameSpec<T>,
    p: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let g = GammaForm::new(p, spec.gamma)?.transform();
    let gb = &g * b;
    let ga = &g * a;
    let s = &spec.r + b.transpose() * &gb;
    let s_inv = linalg::sym_inverse(&s).ok_or_else(|| Error::InvalidInput("R + B^T G B is singular".into()))?;
    let k = s_inv * (b.transpose() * &ga);
    let next = &spec.q + a.transpose() * &ga - (a.transpose() * gb) * &k;
    Ok((linalg::symmetrize(&next), k))
}

fn check_model<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, spec: &GameSpec<T>) -> Result<()> {
    let (n, m) = (spec.n(), spec.m());
    if a.shape() != (n, n) || b.shape() != (n, m) {
        return Err(Error::Dimension(format!(
            "A is {:?}, B is {:?}, expected ({n}, {n}) and ({n}, {m})",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Solves `|x|^2_P = min_u max_w [|x|^2_Q + |u|^2_R - gamma^2 |w|^2 + |Ax + Bu + w|^2_P]`
/// by value iteration from `P_0 = Q`.
///
/// The iterates are nondecreasing. Reaching `lambda_max(P_k) >= gamma^2 (1 - 1e-6)`
/// means the game value is unbounded at this `gamma` and yields
/// [`Error::GammaTooSmall`].
pub fn hinf_riccati<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &GameSpec<T>,
    opts: &RiccatiOptions<T>,
) -> Result<RiccatiSolution<T>> {
    check_model(a, b, spec)?;
    if opts.max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    let gamma = spec.gamma;
    let too_small = || Error::GammaTooSmall { gamma: gamma.value().as_f64(), model: None };
    let ceiling = gamma.squared() * (T::one() - T::tol(1e-6));

    let mut p = spec.q.clone();
    let mut residual = T::max_value().unwrap();
    for iter in 1..=opts.max_iter {
        let (next, _) = riccati_step(a, b, spec, &p).map_err(|e| match e {
            Error::NotContractive { .. } | Error::NotPositive { .. } => too_small(),
            other => other,
        })?;
        if !next.iter().all(|v| v.is_finite()) || lambda_max(&next) >= ceiling {
            return Err(too_small());
        }
        residual = max_abs(&(&next - &p));
        p = next;
        if residual <= opts.tol {
            let (rhs, k) = riccati_step(a, b, spec, &p).map_err(|_| too_small())?;
            return Ok(RiccatiSolution { residual: max_abs(&(rhs - &p)), p, k, iterations: iter });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: residual.as_f64() })
}

/// Non-minimal state realization of
/// `y_t = -a_1 y_{t-1} - ... - a_n y_{t-n} + b_1 u_{t-1} + ... + b_n u_{t-n}`
/// with state `x_t = (y_{t-1}, ..., y_{t-n}, u_{t-1}, ..., u_{t-n})`.
pub fn io_to_state<T: Real>(a_coeffs: &[T], b_coeffs: &[T]) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let n = a_coeffs.len();
    if n == 0 || b_coeffs.len() != n {
        return Err(Error::InvalidInput(format!(
            "need n >= 1 coefficients of each kind, got {} and {}",
            n,
            b_coeffs.len()
        )));
    }
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        a[(0, j)] = -a_coeffs[j];
        a[(0, n + j)] = b_coeffs[j];
    }
    for r in 1..n {
        a[(r, r - 1)] = T::one();
        a[(n + r, n + r - 1)] = T::one();
    }
    let mut b = DMatrix::zeros(2 * n, 1);
    b[(n, 0)] = T::one();
    Ok((a, b))
}

/// Output `y_{t-1}` read off an [`io_to_state`] state vector.
pub fn io_output<T: Real>(x: &DVector<T>) -> T {
    x[0]
}
