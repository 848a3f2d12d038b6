//! Estimation of long-term average treatment effects from fused data.
//!
//! A randomized experiment that only follows subjects long enough to record a
//! short-term outcome `M` is pooled with an observational sample in which both
//! the short-term outcome and the long-term outcome `Y` are recorded, but where
//! treatment assignment is confounded by unobserved variables. Neither sample
//! identifies the effect of the treatment on `Y` alone; combined under suitable
//! assumptions, they do.
//!
//! The crate implements four identification strategies on top of a shared
//! nuisance-fitting layer:
//!
//! * [`estimators::latent_unconf`] — nested-regression baseline that treats the
//!   short-term outcome as a stand-in for the latent confounder.
//! * [`estimators::equiconf`] — difference-in-differences style estimators that
//!   assume equal additive confounding bias for the short- and long-term
//!   outcomes (marginal, conditional-on-covariates, and quantile-quantile
//!   variants).
//! * [`estimators::bsiv`] — bespoke-instrument estimators that replace the
//!   equi-confounding restriction with an observed binary confounder whose
//!   partial additive association is equal for both outcomes.
//! * [`estimators::proximal`] — proximal estimators built on outcome and
//!   treatment bridge functions solved from conditional moment equations,
//!   including a multiply robust one-step version.
//!
//! [`estimators::robust_if`] carries the influence-function machinery (standard
//! errors, robustness audits), and [`simgen`] provides seeded synthetic data
//! generators with exact or Monte Carlo ground truth, including small discrete
//! worlds on which every identification formula can be enumerated exactly.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats and the
//! command-line front end live in the companion `fusioncausal` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod estimators;
pub mod nuisance;
pub mod rng;
pub mod simgen;

pub use data::{DomainTag, FusedDataset, Observation, ZRole};
pub use error::{Error, Result};
pub use estimators::{Estimand, EstimateReport};
