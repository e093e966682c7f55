//! Compressible Reynolds limit of thin-film Navier-Stokes flow: constitutive
//! laws, a finite-volume Reynolds solver, a thin-channel Navier-Stokes solver
//! and the tooling that compares the two as the aspect ratio shrinks.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod laws;
pub mod linalg;
pub mod ns;
pub mod reynolds;

pub use error::{Error, Result};
