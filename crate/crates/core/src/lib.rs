//! Passive crowd sensing from LTE downlink channel state information.
//!
//! The pipeline runs capture → [`lte_phy`] (sync, OFDM, LS channel
//! estimation) → [`features`] (PCA) → [`detector`] (empty vs occupied on the
//! first principal component) → [`estimator`] (1-NN crowd-size classes).
//! [`scenario_sim`] provides labeled synthetic data and [`harness`] runs and
//! persists whole experiments.

// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod detector;
pub mod estimator;
pub mod features;
pub mod harness;
pub mod lte_phy;
pub mod scenario_sim;

pub use dataset::CsiDataset;
