//! Steady thermoelectric solver on box domains.
//!
//! The coupled system for temperature `u` and magnetic field `H`
//!
//! ```text
//! curl(sigma(u)^-1 curl H) = 0,  div H = 0,   -Lap u = sigma(u)^-1 |curl H|^2
//! ```
//!
//! is solved through its scalar reduction: on a box the current `J = curl H` is
//! `sigma(u) (grad phi + E0)` for a potential `phi`, so each fixed-point step
//! solves a conductivity-weighted potential problem, forms the current, and
//! solves a Poisson problem for the temperature with the Joule heating on the
//! right-hand side. `H` is recovered afterwards from the div-curl system.

pub mod boundary;
pub mod conductivity;
pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod mesh;
pub mod ops;
pub mod quadrature;
pub mod solve;
pub mod verification;

pub use boundary::{AppliedField, BoundaryFlux};
pub use conductivity::{eval_sigma, sigma_to_edges, ConductivityKind, ConductivityModel};
pub use coupled::{
    Drive, FixedPoint, JouleMode, PicardControls, PicardDiagnostics, PicardStatus, ProblemSpec,
    Sources,
};
pub use error::{Error, Result};
pub use mesh::{CellField, EdgeField, FaceField, Grid, Layout, NodeField};
pub use solve::{LinearSolveReport, SolverControls};
