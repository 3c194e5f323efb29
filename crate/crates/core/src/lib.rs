//! Radial ground states of Choquard equations with a local power
//! perturbation, their rescalings and limit profiles, and the asymptotic
//! scaling laws they obey as the frequency `ε` grows.

pub mod acceptance;
pub mod asymptotics;
pub mod cli;
pub mod closed_forms;
pub mod error;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod radial_grid;
pub mod rescale;
pub mod riesz;
pub mod solver;

pub use error::{Error, Result};
