//! Thin-channel compressible Navier-Stokes solver on a terrain-following mesh.

pub(crate) mod residual;
mod solver;
mod state;

pub use residual::{residual, residual_fields, ResidualNorms, Residuals};
pub use solver::{history_csv, march_to_steady, HistoryRow, SolveConfig, Steady};
pub use state::{lift_velocity, NsGrid, ThinState};
