//! Manufactured problems, error metrics, refinement studies and the
//! command-line front end.

pub mod cli;
mod metrics;
mod problems;
mod report;
mod runner;

pub use metrics::{compute_errors, estimate_rates, multiplier_error, RelativeErrors, EXACT_ERROR};
pub use problems::{Manufactured, ProblemName, ScalarField, VectorField};
pub use report::{ConvergenceReport, LevelResult, RateTable, E0_NOTE};
pub use runner::{radial_foot, run_study, solve_level, LevelSolution, MeshFamily, ProblemSpec};
