//! Maximum-likelihood subspace nucleation for continuous-variable quantum
//! state tomography.
//!
//! The crate simulates measurement data from random rank-one outcomes on a
//! truncated Fock space, grows a reconstruction subspace greedily along the
//! largest increase in maximal log-likelihood, and scores every grown
//! subspace by cross-validated prediction error with parametric-bootstrap
//! statistics.
//!
//! Module map:
//!
//! - [`quantum`]: operators, states, masks, basis transforms
//! - [`measurement`]: random measurements, count data, folds, random streams
//! - [`ml`]: likelihood and the subspace-restricted estimator
//! - [`nucleation`]: candidate enumeration and greedy growth
//! - [`validation`]: prediction error, bootstrap, interval and box statistics
//! - [`experiment`] and [`io`]: end-to-end runs and file formats

pub mod error;
pub mod experiment;
pub mod io;
pub mod measurement;
pub mod ml;
pub mod nucleation;
pub mod quantum;
pub mod validation;

pub use error::{Error, Result};
