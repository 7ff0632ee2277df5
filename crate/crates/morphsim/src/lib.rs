//! Simulator and verification harness for a morphogen transport model: a
//! reaction-diffusion system coupling a diffusing concentration l to an
//! immobile bound fraction s on an interval or rectangle,
//!
//! ```text
//!   dl/dt - D lap(l) = delta*s - l*(1 - s)      flux -nu into the Neumann face,
//!   ds/dt            = -(delta+eps)*s + l*(1-s) l = 0 on the Dirichlet part.
//! ```
//!
//! The crate computes the unique steady state by a monotone Picard iteration,
//! evolves the system with an IMEX scheme whose s-update is exact and
//! bound-preserving, and verifies exponential convergence to equilibrium
//! against the spectral-gap rate chi/2 through a Lyapunov functional, its
//! dissipation, and a family of discrete norms.

// Guards of the form `!(x > 0.0)` are deliberate throughout: unlike the
// inverted comparison they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod config;
pub mod csv_io;
mod error;
pub mod evolution;
pub mod lyapunov;
pub mod mesh;
pub mod operator;
pub mod scenario;
pub mod spectral;
pub mod steady;
pub mod tolerances;

pub use config::{parse_config, ScenarioConfig};
pub use error::{Error, Result};
pub use evolution::{integrate, step, ModelParams, Snapshot, Trajectory};
pub use mesh::{build_grid, BcKind, BoundaryData, Face, Field, Grid, GridSpec};
pub use operator::{gradient_norm_sq, laplacian_operator, neumann_source};
pub use scenario::{run_scenario, RunMode, RunReport};
pub use spectral::{compute_chi, smallest_eigenvalue, EigenResult};
pub use steady::{apply_t, f_reaction, picard_steady, SteadyState};
