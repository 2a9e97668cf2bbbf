//! Adaptive cascade of warped generalized-analytic function approximators.
//!
//! This crate implements a coordinate-based field representation built from
//! three pieces, trained greedily as a residual cascade:
//!
//! 1. a small sine-activated coordinate warp ([`warp`]) that deforms input
//!    coordinates into a latent complex plane,
//! 2. a fixed bank of generalized-analytic (Vekua-Taylor) features evaluated
//!    at the warped points ([`basis`]), and
//! 3. a closed-form ridge-regression output layer ([`solver`]) whose solve is
//!    differentiated analytically so warp parameters can follow the *optimal*
//!    output layer during training.
//!
//! The [`cascade`] module composes the pieces: each block fits the residual
//! left by its predecessors at a progressively higher frequency scale.
//! [`tasks`] generates the benchmark problems used by the command-line
//! driver, [`model_io`] round-trips trained models bit-exactly, and
//! [`export`] writes fields, metrics, and loss traces.
//!
//! Determinism contract: for a fixed seed, training and evaluation produce
//! bit-identical results regardless of whether the `parallel` feature is
//! enabled. All parallel reductions are chunked in a fixed order.

// Validation sites write `!(x > 0.0)` rather than `x <= 0.0` so that NaN is
// rejected too; the negated form is deliberate, not a readability slip.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cascade;
pub mod error;
pub mod export;
pub mod mat;
pub mod model_io;
pub mod rng;
pub mod solver;
pub mod tasks;
pub mod warp;

pub use cascade::{CascadeModel, FitTrace, TrainConfig};
pub use error::{Result, VekuaError};
pub use mat::Mat;
pub use tasks::{TaskData, TaskId};
