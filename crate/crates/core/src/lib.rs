//! Finite-time blow-up laboratory for the radial semilinear heat equation
//! u_t = Δu + e^{u^p} u^q on a ball with zero Dirichlet data.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod incgamma;
pub mod init;
pub mod interp;
pub mod nonlinearity;
pub mod ode;
pub mod pipeline;
pub mod quadrature;
pub mod selfsimilar;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use nonlinearity::{Family, LogValue, Nonlinearity};
