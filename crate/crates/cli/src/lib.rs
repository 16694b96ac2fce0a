//! Command-line front end for minimax adaptive control studies.

pub mod commands;
pub mod config;
pub mod plot;

use std::fmt;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
/// Infeasible level, failed verification or a violated check.
pub const EXIT_VIOLATION: u8 = 2;
/// Malformed or inconsistent input.
pub const EXIT_INPUT: u8 = 3;
/// A simulation stopped at the overflow guard.
pub const EXIT_TRUNCATED: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Infeasible(_) => EXIT_VIOLATION,
            CliError::Io(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<minimax_adapt::Error> for CliError {
    fn from(e: minimax_adapt::Error) -> Self {
        use minimax_adapt::Error as E;
        match e {
            E::GammaTooSmall { .. }
            | E::InfeasibleAtGamma { .. }
            | E::NoConvergence { .. }
            | E::GridTooCoarse { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
