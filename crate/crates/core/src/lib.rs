//! Minimax adaptive control for linear systems whose dynamics `(A, B)` are
//! known to lie in a finite set of candidate models.
//!
//! The crate synthesizes gain certificates (per-model gains `K_i` and
//! cross-model quadratic forms `P_ij`), runs the resulting adaptive control
//! law in closed loop, and checks the Bellman-inequality and cost-bound
//! guarantees numerically.
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! the `*64` / `*32` aliases below fix it to `f64` / `f32`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod controller;
pub mod dpverify;
mod error;
pub mod linalg;
pub mod output;
pub mod quadform;
pub mod riccati;
mod scalar;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
pub use quadform::{Gamma, GammaForm, QuadMax};
pub use scalar::Real;

pub type Matrix<T> = nalgebra::DMatrix<T>;
pub type Vector<T> = nalgebra::DVector<T>;

pub type Gamma64 = quadform::Gamma<f64>;
pub type GameSpec64 = riccati::GameSpec<f64>;
pub type RiccatiSolution64 = riccati::RiccatiSolution<f64>;
pub type Model64 = synthesis::Model<f64>;
pub type ModelSet64 = synthesis::ModelSet<f64>;
pub type Certificate64 = synthesis::Certificate<f64>;
pub type ControllerState64 = controller::ControllerState<f64>;
pub type Trajectory64 = simulation::Trajectory<f64>;

pub type Gamma32 = quadform::Gamma<f32>;
pub type GameSpec32 = riccati::GameSpec<f32>;
pub type RiccatiSolution32 = riccati::RiccatiSolution<f32>;
pub type Model32 = synthesis::Model<f32>;
pub type ModelSet32 = synthesis::ModelSet<f32>;
pub type Certificate32 = synthesis::Certificate<f32>;
pub type ControllerState32 = controller::ControllerState<f32>;
pub type Trajectory32 = simulation::Trajectory<f32>;
