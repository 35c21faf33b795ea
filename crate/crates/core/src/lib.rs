//! Logistic regression for an unlabeled, survey-weighted dataset whose only
//! supervision comes from contingency tables of labeled counts.
//!
//! The crate is `no_std` (with `alloc`). It covers the whole numerical
//! pipeline:
//!
//! * [`model`]: datasets, axis-aligned cell partitions, contingency tables
//!   and fitted models, with structural validation.
//! * [`likelihood`]: cell-level probabilities averaged over the weighted
//!   dataset and the conditional multinomial log-likelihood.
//! * [`estimation`]: Nelder-Mead maximization, finite-difference covariance
//!   and intercept calibration against an external marginal rate.
//! * [`selection`]: forward stepwise AIC/BIC, multiple imputation, majority
//!   consensus and Rubin pooling.
//! * [`inference`]: prediction, the threshold classifier baseline, weighted
//!   group aggregation and bootstrap intervals.
//! * [`simulation`]: synthetic data, table generation from a known truth and
//!   the method-comparison study.
//!
//! Enable the `parallel` feature (implies `std`) to fan bootstrap replicates,
//! imputations and simulation replicates out over a rayon pool. Results do
//! not depend on scheduling.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(all(test, not(feature = "std")))]
extern crate std;

pub mod error;
pub mod estimation;
pub mod hessian;
pub mod inference;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod selection;
pub mod simplex;
pub mod simulation;

mod par;

pub use error::{Error, Result};
pub use estimation::{calibrate_intercept, covariance, fit, OptimizerSettings};
pub use likelihood::{individual_probability, sigmoid, LikelihoodContext};
pub use model::{
    Cell, CellBox, CellPartition, Column, ContingencyTable, IndividualDataset, Interval,
    MarginalTarget, ModelFit, Scale,
};
