//! Simulation of self-regulating biological transportation networks.
//!
//! A conductivity field (scalar or symmetric 2×2 tensor) evolves by the
//! constrained L² gradient flow of an entropy-dissipation energy. Space is
//! discretized with a nodal ghost cut-cell Q1 finite element method on a
//! uniform background grid covering the unit square; the physical domain is
//! the negative region of a level-set function.
//!
//! Module map:
//!
//! * [`geometry`]: level sets, node classification with snapping, cut-cell polygons.
//! * [`quadrature`]: exact polygon integration through the divergence theorem.
//! * [`fem`]: Q1 space on active nodes, assembly, zero-mean Neumann solver.
//! * [`flow`]: entropy generators, pressure / auxiliary solves, conductivity update, energy.
//! * [`analysis`]: Wasserstein distances, Richardson order, symmetry and contour diagnostics.
//! * [`cli_io`]: configuration files, run orchestration, CSV output.

pub mod analysis;
pub mod cli_io;
pub mod error;
pub mod fem;
pub mod flow;
pub mod geometry;
pub mod quadrature;
pub mod tensor;

pub use error::{Error, Result};
