//! Simulation and verification tools for the marked point process of
//! k-nearest-neighbor ball volumes of Poisson and binomial points on the flat
//! torus `[0,1)^d`.
//!
//! The crate is organized bottom-up:
//!
//! * [`torus`]: canonical points, the wrap-around metric, ball volumes;
//! * [`sampling`]: Poisson, binomial, coupled and limit-process samplers;
//! * [`spatial`]: grid index and per-point neighbor queries;
//! * [`process`]: the marked process, truncations, low-degree counts;
//! * [`blocking`]: the subcube decomposition and per-cube processes;
//! * [`analytic`]: closed-form constants, rates, bounds and limits;
//! * [`experiments`]: Monte Carlo estimators with analytic references;
//! * [`cli`]: the command-line front end.

// `!(x > 0.0)` is used deliberately so that NaN fails the guard
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod blocking;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod process;
pub mod rng;
pub mod sampling;
pub mod spatial;
pub mod stats;
pub mod torus;

pub use error::{LabError, Result};
pub use process::{build_l, MarkedPointSet, ProcessParams};
pub use rng::RngStream;
pub use sampling::PointSet;
pub use torus::{Dimension, TorusPoint};
