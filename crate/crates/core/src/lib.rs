//! Stochastic-Lagrangian N-replica simulator for the 2D periodic
//! incompressible Navier-Stokes equations.
//!
//! Each replica is a full stochastic flow of diffeomorphisms, stored as
//! periodic forward and inverse displacement fields on a uniform grid. The
//! shared velocity is the replica average of the Weber formula, or
//! equivalently the Biot-Savart velocity of the averaged pulled-back
//! vorticity. A pseudo-spectral reference solver, diagnostics tied to the
//! long-time energy behaviour, a 1D Burgers analogue and an experiment
//! harness sit on top.

pub mod burgers;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod experiments;
pub mod error;
pub mod flowmap;
pub mod grid;
pub mod interp;
pub mod norm;
pub mod reference;
pub mod rng;
pub mod snapshot;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Field, PeriodicGrid, ScalarField, TensorField, VectorField};
pub use interp::Interpolation;
pub use norm::{nondim_norm, Lp};
