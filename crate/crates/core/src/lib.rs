//! Symmetry reduction and reconstruction of the Hamilton-Jacobi equation on
//! `T*R^n` for translation symmetries, and generating-function symplectic
//! maps built from (complete) Hamilton-Jacobi solutions.
//!
//! The crate is organized bottom-up:
//!
//! - [`expr`]: parse, evaluate and differentiate scalar formulas.
//! - [`phase_space`]: canonical structure, Hamiltonian vector fields and a
//!   reference RK4 flow.
//! - [`symmetry`]: translation actions, cotangent lifts, momentum maps.
//! - [`reduction`]: quotient charts, reduced Hamiltonians, magnetic terms.
//! - [`hj`]: residual checks and 1-D quadrature solvers.
//! - [`reconstruction`]: lifting reduced solutions and trajectories.
//! - [`integrators`]: implicit type I / type II maps and their checks.
//! - [`cli`]: JSON scenarios and the command runner behind the binary.

pub mod error;
pub mod expr;
pub mod grid;

pub use error::{Error, Result};
pub use expr::{parse, Bindings, Expr};
pub mod cli;
pub mod forms;
pub mod hj;
pub mod integrators;
pub mod phase_space;
pub mod reconstruction;
pub mod reduction;
pub mod symmetry;
