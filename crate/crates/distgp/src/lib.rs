//! Distributed estimation of time-varying spatial fields.
//!
//! A fleet of agents learns a moving scalar field cooperatively: each agent
//! runs Gaussian Process regression compressed into a fixed low-rank feature
//! space (Nystrom landmarks), tracks the feature coefficients with a Kalman
//! filter whose process noise models the field's drift, and fuses estimates
//! with its neighbors through information-form average consensus.
//!
//! Module map:
//! - [`kernel`]: kernel functions, Gram matrices, exact GP inference (the
//!   test oracle).
//! - [`nystrom`]: landmark sampling, eigenbasis construction, feature maps,
//!   low-rank GP inference.
//! - [`filter`]: coefficient Kalman filter, information form, batch Bayesian
//!   linear regression, exponential-forgetting baseline.
//! - [`consensus`]: distance-threshold communication graphs and synchronous
//!   neighbor averaging of information states.
//! - [`sim`]: the multi-agent world, moving ground truth, run orchestration,
//!   and CSV serialization of run logs.

pub mod consensus;
pub mod error;
pub mod filter;
pub mod kernel;
pub mod nystrom;
pub mod sim;

pub use error::{Error, Result};
