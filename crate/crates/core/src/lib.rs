//! Virtual element solver for the 2D Poisson problem with weakly imposed
//! Dirichlet data.
//!
//! Two boundary treatments are provided: a stabilized Lagrange multiplier
//! formulation (Barbosa-Hughes) and the symmetric Nitsche method obtained
//! from it by edge-local static condensation. On curved domains approximated
//! by inscribed polygons, a Taylor-expansion correction of the boundary data
//! restores optimal convergence.
//!
//! Module map:
//!
//! * [`geometry`]: polygonal meshes, mesh generators, quadrature, quality stats
//! * [`basis`]: scaled monomial bases on cells and edges
//! * [`element`]: local VEM element (projectors, stabilization, stiffness, load)
//! * [`weak_bc`]: Barbosa-Hughes and Nitsche assembly, multipliers, boundary norms
//! * [`curved`]: level-set domains, the `delta` rootfinder, corrected assembly
//! * [`linalg`]: sparse systems, direct solve, condensation, condition estimates
//! * [`study`]: manufactured problems, error metrics, refinement studies, CLI

pub mod basis;
pub mod curved;
pub mod element;
mod error;
pub mod geometry;
pub mod linalg;
pub mod study;
pub mod weak_bc;

pub use error::{Error, Result};
pub use geometry::Point;
