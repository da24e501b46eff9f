//! Persistence of synchronization in networks of coupled chaotic
//! oscillators under time-varying mismatch in the coupling.
//!
//! The crate covers the graph and Laplacian spectra layer, the coupled
//! Lorenz network model, fixed-step Runge-Kutta integration, the
//! closed-form persistence bounds and the numerical experiments built on
//! top of them.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod integrate;
pub mod matrix;
pub mod seeds;
pub mod spectra;

pub use error::{Error, Result};
pub use graph::{Graph, GraphKind, GraphRecipe};
pub use matrix::Matrix;
