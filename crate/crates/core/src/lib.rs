//! Numerical laboratory for nonlocal dislocation dynamics.
//!
//! The crate evaluates the fractional operator `I_s`, computes heteroclinic
//! layer solutions and their correctors, integrates the signed particle ODE
//! systems, evolves the scaled reaction–diffusion PDE and checks the
//! quantitative asymptotics (collision times, separation laws, relaxation
//! rates, absence of equilibria).

pub mod analysis;
pub mod error;
pub mod evolver;
pub mod fracop;
pub mod layer;
pub mod oracle;
pub mod particles;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod scenarios;

pub use error::{Error, Result};
