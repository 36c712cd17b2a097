//! Spectral flow of scattering matrices near shape resonances.
//!
//! The crate is layered bottom-up:
//!
//! * [`potential`] builds radial potentials, their Agmon geometry and the
//!   interior/exterior triple used for resonance analysis;
//! * [`radial`] solves the partial-wave problem (phase shifts, Green kernels,
//!   Birman-Schwinger matrices, bound states of the interior operator);
//! * [`scattering`] assembles channel eigenphases into scattering-matrix
//!   tables and energy families;
//! * [`flow`] computes spectral flow, eigenvalue counting functions and the
//!   spectral shift function;
//! * [`lab`] runs the resonance experiments, fits and the command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod flow;
pub mod lab;
pub mod numerics;
pub mod potential;
pub mod radial;
pub mod scattering;

pub use error::{Error, Result};
pub use exec::Execution;
