//! Numerical estimators for mean equicontinuity, mean sensitivity and
//! discrete spectrum of dynamical systems over `Z^d` and `R^d`.
//!
//! Every limsup/liminf is approximated over a [`Schedule`] of nested Følner
//! windows `[0, n)^d`; the estimators report the per-window traces so the
//! caller can judge convergence.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod classify;
pub mod delone;
mod error;
pub mod fixtures;
pub mod pseudometrics;
pub(crate) mod rng;
pub mod spectral;
pub mod systems;
pub mod windows;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use systems::{
    make_observable, make_system, KnownClass, Observable, ObservableSpec, OrbitSeries, Point, PointKind, SystemHandle,
    SystemSpec,
};
pub use windows::{DensityEstimate, GroupIndex, GroupKind, Schedule, Window};
