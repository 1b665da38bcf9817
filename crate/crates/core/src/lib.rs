//! Balancing weights for binary-treatment causal estimation.
//!
//! The crate provides entropy balancing, covariate balancing propensity
//! scores (over-identified and balance-only), boosted-tree and logistic
//! propensity scores, all able to balance first, second and third powers
//! of the covariates, together with a seeded Monte Carlo harness that
//! compares them on a grid of synthetic treatment and outcome models.

pub mod balancers;
pub mod config;
pub mod design;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod propensity;
pub mod seed;
pub mod types;

pub use error::{Error, Result};
pub use nalgebra;
pub use types::{Estimand, MomentOrder};
