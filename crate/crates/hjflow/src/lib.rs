//! Numerical solver and verification harness for gradient-driven heat flows
//! `u_t - Δu = F(∇u)` with homogeneous Neumann boundary conditions on
//! intervals, rectangles, and staircase unions of rectangles (L-shapes and
//! other non-convex domains).
//!
//! The crate provides discrete domains and Neumann finite-difference
//! operators, a catalog of gradient nonlinearities with assumption
//! validators, an IMEX time stepper with run monitors, spectral utilities
//! (second Neumann eigenvalue, heat semigroup, Duhamel fixed-point solver),
//! and post-processing for exponential decay rates, the limit constant, and
//! order-preservation diagnostics. The `hjflow` binary drives batch
//! experiments from flat key-value configs and emits CSV artifacts.

pub mod asymptotics;
pub mod config;
mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod io;
pub mod nonlinearity;
pub mod operators;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use field::{Field, VectorField};
pub use grid::{build_interval, build_rectangle, build_union_rectangles, Grid, GridKind, Rect};
pub use nonlinearity::NonlinearitySpec;
pub use stepper::{run, InitialDatum, RunConfig, RunResult, RunStatus};
