//! Cooperative self-localization and multi-target tracking over an agent network.
//!
//! Agents estimate their own states from inter-agent range-bearing measurements
//! and jointly track an unknown number of targets by loopy belief propagation
//! with probabilistic data association. Beliefs are Gaussian mixtures (or single
//! Gaussians) kept in log-weight form.
//!
//! Layout, bottom up:
//!
//! - [`gm`]: scaled Gaussians, information-form fusion, truncation and merging.
//! - [`models`], [`scenario`]: dynamics, sensors, ground truth and measurement synthesis.
//! - [`association`], [`messages`]: β/η association loop and the BP messages.
//! - [`gibbs`], [`consensus`], [`hogwild`], [`single_gaussian`]: mixture products,
//!   centralized and decentralized.
//! - [`filter`]: one time step for every variant.
//! - [`metrics`], [`experiment`]: OSPA/RMSE, Monte-Carlo batches and CSV artifacts.

pub mod association;
pub mod consensus;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod gibbs;
pub mod gm;
pub mod hogwild;
pub mod messages;
pub mod metrics;
pub mod models;
pub mod scenario;
pub mod seeding;
pub mod single_gaussian;

pub use error::{Error, Result};
