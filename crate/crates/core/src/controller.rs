//! Runtime adaptive control law.
//!
//! The controller keeps one residual energy per model,
//! `z_i = gamma^2 sum_t |A_i x_t + B_i u_t - x_{t+1}|^2`, and applies the gain
//! of the model with the smallest residual (ties to the smallest index).

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::synthesis::{Certificate, ModelSet};
use crate::Real;

/// Index of the smallest entry, ties broken to the smallest index.
pub fn argmin<T: Real>(z: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v < z[best] {
            best = i;
        }
    }
    best
}

/// Sufficient statistic of the data for a finite model set.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T: Real> {
    /// Weighted residual energy per model.
    pub z: Vec<T>,
    /// Active model, `argmin z`.
    pub k: usize,
    /// Number of observed transitions.
    pub t: usize,
}

impl<T: Real> ControllerState<T> {
    pub fn new(models: usize) -> Self {
        Self { z: vec![T::zero(); models], k: 0, t: 0 }
    }

    /// State after observing the transition `(x, u) -> x_next`.
    pub fn observe(&self, models: &ModelSet<T>, gamma: T, x: &DVector<T>, u: &DVector<T>, x_next: &DVector<T>) -> Self {
        let g2 = gamma * gamma;
        let z: Vec<T> = self
            .z
            .iter()
            .zip(models.models())
            .map(|(&zi, model)| zi + g2 * (model.predict(x, u) - x_next).norm_squared())
            .collect();
        let k = argmin(&z);
        Self { z, k, t: self.t + 1 }
    }

    /// `u = -K_k x` for the active model.
    pub fn control(&self, cert: &Certificate<T>, x: &DVector<T>) -> DVector<T> {
        -(&cert.k[self.k] * x)
    }
}

/// `u = -K_k x` with `k = argmin z`.
pub fn control<T: Real>(state: &ControllerState<T>, cert: &Certificate<T>, x: &DVector<T>) -> DVector<T> {
    state.control(cert, x)
}

/// One observed transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T: Real> {
    pub x: DVector<T>,
    pub u: DVector<T>,
    pub x_next: DVector<T>,
}

/// `sum_t (x_{t+1} - A x_t)^T B u_t`, the statistic deciding the input sign
/// for the model pair `{(A, B), (A, -B)}`.
pub fn sign_statistic<T: Real>(history: &[Transition<T>], a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    history.iter().fold(T::zero(), |acc, tr| {
        let innovation = &tr.x_next - a * &tr.x;
        acc + innovation.dot(&(b * &tr.u))
    })
}

/// Input-sign law: `u = -K x` when the sign statistic is nonnegative,
/// `u = K x` otherwise.
pub fn sign_rule_control<T: Real>(
    history: &[Transition<T>],
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: &DMatrix<T>,
    x: &DVector<T>,
) -> DVector<T> {
    if sign_statistic(history, a, b) >= T::zero() {
        -(k * x)
    } else {
        -(-k * x)
    }
}

/// `max_{i,j} |x|^2_{P_ij} - (z_i + z_j) / 2` and its maximizing pair
/// (first pair in row-major order on ties).
pub fn value_upper<T: Real>(cert: &Certificate<T>, z: &[T], x: &DVector<T>) -> (T, (usize, usize)) {
    let half = T::lit(0.5);
    let mut best = (T::min_value().unwrap(), (0, 0));
    for (i, row) in cert.p.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let v = linalg::quad(p, x) - (z[i] + z[j]) * half;
            if v > best.0 {
                best = (v, (i, j));
            }
        }
    }
    best
}

/// Accumulated data matrix `Z = sum [-x_{t+1}; x_t; u_t][-x_{t+1}; x_t; u_t]^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix<T: Real> {
    pub z: DMatrix<T>,
    n: usize,
    m: usize,
}

impl<T: Real> InfoMatrix<T> {
    pub fn new(n: usize, m: usize) -> Self {
        Self { z: DMatrix::zeros(2 * n + m, 2 * n + m), n, m }
    }

    pub fn push(&mut self, x: &DVector<T>, u: &DVector<T>, x_next: &DVector<T>) {
        let mut col = DVector::zeros(2 * self.n + self.m);
        col.rows_mut(0, self.n).copy_from(&-x_next);
        col.rows_mut(self.n, self.n).copy_from(x);
        col.rows_mut(2 * self.n, self.m).copy_from(u);
        self.z += &col * col.transpose();
    }

    /// `||[I A B]^T||^2_Z = trace([I A B] Z [I A B]^T)`, the summed squared
    /// prediction error of the model `(A, B)`.
    pub fn residual_energy(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> T {
        let mut stacked = DMatrix::zeros(self.n, 2 * self.n + self.m);
        stacked.columns_mut(0, self.n).fill_with_identity();
        stacked.columns_mut(self.n, self.n).copy_from(a);
        stacked.columns_mut(2 * self.n, self.m).copy_from(b);
        (&stacked * &self.z * stacked.transpose()).trace()
    }

    /// The residual energies `gamma^2 ||[I A_i B_i]^T||^2_Z` for every model.
    pub fn weighted_residuals(&self, models: &ModelSet<T>, gamma: T) -> Vec<T> {
        models.models().iter().map(|m| gamma * gamma * self.residual_energy(&m.a, &m.b)).collect()
    }
}
