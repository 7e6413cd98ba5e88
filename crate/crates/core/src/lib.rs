//! Task-based figures of merit for parametric models with priors.
//!
//! The crate computes Fisher information (pointwise, Bayesian, matrix),
//! ideal-observer ROC/AUC/detectability, minimum probability of error,
//! Shannon information and conditional entropy of the two-point detection
//! task, estimator EMSE, and the CRB / van Trees / Ziv-Zakai bounds. The
//! [`expansions`] module measures the small-change curvature of each
//! detection metric and compares it with the Fisher quantity that predicts it.
//!
//! All information quantities are in nats.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod expansions;
pub mod fisher;
pub mod info;
pub mod model;
pub mod numerics;
pub mod observer;
pub mod prior;

pub use error::{FomError, Result};
pub use model::Model;
pub use numerics::{Estimate, EstimateMethod, Method, Numerics};
pub use observer::DetectionTask;
pub use prior::{Prior, ProductPrior};
