//! Gas–surface scattering kernels and kinetic boundary conditions derived
//! from nanoscale wall models.
//!
//! The library builds, from a classical wall potential and a phonon-bath
//! collision model, the reflection operator that closes the Boltzmann
//! equation at a solid boundary:
//!
//! * a **flat wall** produces a Maxwell-like condition whose accommodation
//!   coefficient `a(v)` is *velocity dependent*, computed from the ratio of
//!   the layer crossing time to the phonon relaxation time
//!   ([`flat_bc`], [`phonon`], [`kinematics`]);
//! * the **surface-layer kinetic problem** resolves the layer structure
//!   itself and is solved by a conservative discrete-ordinates scheme
//!   ([`layer`]);
//! * a **rough (periodic) wall** is handled by tracing molecular
//!   characteristics through the corrugated layer and assembling discrete
//!   scattering kernels from the exit statistics ([`rough`]).
//!
//! Shared infrastructure: adaptive quadrature with endpoint-singularity
//! handling, bisection root finding, and an embedded Runge–Kutta pair with
//! event location ([`numerics`]); wall potentials ([`potential`]); velocity
//! grids and discrete kernels ([`grid`], [`kernel`]); serializable reports
//! ([`report`]); run configuration ([`config`]) and the command-line
//! front end ([`cli`]).
//!
//! Everything is dimensionless: velocities in units of the thermal speed,
//! energies in units of `m v*² / 2`, lengths in units of the layer
//! thickness.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod kinematics;
pub mod numerics;
pub mod phonon;
pub mod kernel;
pub mod flat_bc;
pub mod layer;
pub mod potential;
pub mod report;
pub mod rough;

pub use error::{Error, Result};
pub use potential::{FlatPotential, PeriodicPotential};
