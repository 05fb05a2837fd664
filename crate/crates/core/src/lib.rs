//! Analysis of discrete-time two-dimensional quasi-birth-and-death (2d-QBD)
//! processes: stability classification via mean drift vectors, solution of
//! the defining matrix quadratic equations, spectral-curve geometry, and the
//! directional geometric decay rates and exact-asymptotic form classes of the
//! stationary distribution.
//!
//! The crate also ships a truncated-chain oracle for independent numerical
//! verification and a generator for the (1,K)-limited-service polling queue,
//! whose published decay-rate tables the `report` module reproduces.
//!
//! Entry points:
//! - [`model`]: block families, validation, (de)serialization, the
//!   (1,K)-limited-service generator.
//! - [`stability`]: stationary vector of `A_{*,*}`, mean drift vectors,
//!   positive-recurrence verdict.
//! - [`spectral`]: the Perron curve `chi(z1, z2)`, its branch roots and
//!   extreme points.
//! - [`kernels`]: minimal nonnegative G/R/N/H kernels and the
//!   one-dimensional QBD stationary solver.
//! - [`asymptotics`]: psi functions, critical points, Type I/II/III
//!   classification, decay rates and form classes.
//! - [`oracle`]: stationary distribution of the chain truncated to a lattice
//!   window, with empirical decay-ratio estimation.
//! - [`report`]: the end-to-end pipeline, analysis bundles and table
//!   reproduction used by the CLI.

pub mod asymptotics;
pub mod config;
pub mod kernels;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod report;
pub mod spectral;
pub mod stability;

mod solve1d;

pub use config::Settings;
pub use model::{
    build_limited_service, load_model, save_model, validate, LimitedServiceParams, QbdModel,
    ValidationReport,
};

pub use nalgebra;
