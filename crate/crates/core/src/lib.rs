//! Numerical laboratory for curvature measures of solutions to fully
//! nonlinear uniformly elliptic equations `F(D²u) = 0`.
//!
//! The crate is organised bottom-up:
//!
//! * [`symmat`] — small symmetric matrices, eigenvalues, Pucci extremal operators.
//! * [`operators`] — the elliptic operator catalog and structural checks.
//! * [`grid`] — uniform grids, grid functions, finite differences, convex envelopes, ABP.
//! * [`solver`] — monotone wide-stencil Dirichlet solver.
//! * [`contact`] — exact contact LPs for the `Θ` and `Ψ` curvature fields.
//! * [`analysis`] — tail fits, measure decay, Calderón–Zygmund, flatness, covering counts.
//! * [`testfns`] — seeded trigonometric and harmonic test functions.
//! * [`counterexample`] — the radial bump family showing the sharp integrability threshold.

pub mod analysis;
pub mod contact;
pub mod counterexample;
pub mod error;
pub mod grid;
pub mod operators;
pub mod rng;
pub mod solver;
pub mod symmat;
pub mod testfns;

pub use error::{Error, Result};
pub use grid::{Domain, Grid, GridFn};
pub use operators::Operator;
pub use symmat::{Ellipticity, SymMat};
