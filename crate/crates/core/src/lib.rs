//! Training-free expert skipping for mixture-of-experts models.
//!
//! The pipeline has three pieces:
//!
//! * a per-layer global factor, calibrated offline as the mean KL divergence
//!   caused by dropping that layer's routed experts, which rescales each
//!   routing probability into an importance score ([`calibration`]);
//! * separate skip thresholds for text and vision tokens ([`dmt`]);
//! * a two-pointer search over a threshold grid that finds the best pair for
//!   a target skip ratio in `O(D)` evaluations instead of `O(D²)`
//!   ([`frontier`]).
//!
//! Everything runs against a small deterministic synthetic MoE model
//! ([`engine`]), with reference baselines in [`baselines`] and file formats in
//! [`io`].

pub mod baselines;
pub mod calibration;
pub mod data;
pub mod dmt;
pub mod engine;
pub mod error;
pub mod frontier;
pub mod io;
pub mod report;
pub mod rng;

mod linalg;
mod parallel;

pub use error::{Error, Result};
pub use linalg::Matrix;
