//! Hypoelliptic diffusion bridges on model spaces.
//!
//! The crate builds the conditioned process `y_t` by Doob transform of a
//! diffusion with generator `L = ½ Σ X_k X_k + X_0`, using the drift
//! `∇^H log q_{1−t}(·, z₀)`, and checks the analytic facts that make the
//! construction work on simulated ensembles:
//!
//! - [`models`]: vector fields, brackets, Hörmander levels, adjoint systems.
//! - [`heatkernel`]: grid, Monte Carlo and closed-form heat-kernel estimates.
//! - [`bridge`]: unconditioned and bridge SDE simulation, Doob weights.
//! - [`ccdist`]: control (Carnot–Carathéodory) distance by optimization.
//! - [`verify`]: statistical checks with self-contained reports.
//! - [`cli`]: the experiment runner behind the `hypobridge` binary.

pub mod bridge;
pub mod ccdist;
pub mod cli;
pub mod heatkernel;
pub mod models;
pub mod rng;
pub mod stats;
pub mod verify;

pub use models::{Point, VectorFieldSystem};
