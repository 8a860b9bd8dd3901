//! Hidden-population size estimation from respondent-driven sampling (RDS) data.
//!
//! The crate is organized around five pieces:
//!
//! * [`rds_model`] ingests and validates survey data as a recruitment forest.
//! * [`ss_estimator`] computes RDS-II and successive-sampling inclusion weights,
//!   weighted trait proportions, tree-bootstrap intervals and design effects.
//! * [`sspse`] fits a prior over population size, fits a degree model and runs
//!   successive-sampling population size estimation by MCMC.
//! * [`prior_pipeline`] turns census and survey aggregates into a prior
//!   population estimate with propagated intervals.
//! * [`netsim`] generates synthetic populations with known truth and simulates
//!   successive sampling and coupon recruitment from them.
//!
//! Every stochastic routine takes an explicit seed; sub-streams are derived with
//! [`seed::sub_seed`] so parallel and serial execution agree bit for bit.

pub mod error;
pub mod netsim;
pub mod prior_pipeline;
pub mod rds_model;
pub mod seed;
pub mod ss_estimator;
pub mod sspse;
pub mod stats;

pub use error::{Error, Result};
