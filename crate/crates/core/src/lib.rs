//! Geometric machinery for the n-body problem on surfaces of constant
//! curvature `σε²`, and numerical continuation of planar relative equilibria,
//! periodic orbits and relative periodic orbits to small `ε`.
//!
//! Layout:
//! - [`geometry`]: exponential chart at the North pole, metric, distances.
//! - [`symmetry`]: the contracted algebras 𝔤_ε, group actions, momentum maps.
//! - [`hamiltonian`]: kinetic and potential energy, gradients, vector field.
//! - [`dynamics`]: implicit-midpoint flow, Jacobians, Poincaré returns.
//! - [`continuation`]: slices, RE/PO/RPO correctors and branches in `ε`.
//! - [`scenarios`]: seed constructors and scenario files.
//! - [`verify`]: the invariant suites driven by the command-line tool.

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod output;
pub mod scenarios;
pub mod state;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{ChartPoint, CurvatureParam};
pub use hamiltonian::{BodySystem, Hamiltonian, HamiltonianFamily, NewtonianSystem};
pub use state::ChartState;
pub use symmetry::{AlgebraElement, GroupElement, MomentumValue};
