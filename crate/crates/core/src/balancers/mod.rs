//! Weighting methods that target covariate balance directly: entropy
//! balancing and the covariate balancing propensity score, plus the
//! conversion of propensity scores into normalized weights.

pub mod cbps;
pub mod entropy;
pub mod weights;

pub use cbps::{cbps_moment_conditions, fit_cbps, CbpsMode, CbpsModel, CbpsOptions};
pub use entropy::{eb_targets, entropy_balance_weights, solve_entropy_balance, EbOptions, EbSolution};
pub use weights::{normalize_within_groups, weights_from_model, weights_from_propensity};
