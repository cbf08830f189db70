//! Time-discrete Fisher infinitesimal model with quadratic selection.
//!
//! `F_n = T[F_{n-1}]` with `T[F] = e^{-m} B[F]`, `m(x) = alpha x^2 / 2` and
//! `B[F](x) = int int G(x - (x1 + x2)/2) F(x1) F(x2) / |F| dx1 dx2`.

pub mod diagnostics;
pub mod error;
pub mod experiment;
mod fft;
pub mod gaussian_oracle;
pub mod grid;
pub mod operators;
pub mod pedigree;

pub use error::{Error, Result};
pub use gaussian_oracle::{eigenpair, Eigenpair, GaussianState};
pub use grid::{Grid, GridDistribution};
pub use operators::{Mode, ModelParams, Trajectory, TrajectoryRecord};
