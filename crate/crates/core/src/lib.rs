//! Link-level simulation of predictive differential CSI feedback.
//!
//! The UE and the base station run identical Kalman predictors over the
//! channel estimate the base station reconstructs. After a short
//! initialization with full quantized estimates, the UE reports only the
//! quantized difference between the shared prediction and its fresh
//! estimate. The [`experiment`] module compares this against plain
//! quantized feedback over seeded Monte Carlo sweeps.
//!
//! ```
//! use csi_feedback::channel::FadingConfig;
//! use csi_feedback::kalman::{init_belief, predict, predict_channel, update, StateSpaceModel};
//! use num_complex::Complex64;
//!
//! let fading = FadingConfig::gauss_markov(0.3).unwrap();
//! let model = StateSpaceModel::from_fading(&fading, 0.1).unwrap();
//! let prior = predict(&init_belief(1).unwrap(), &model).unwrap();
//! let (posterior, _) = update(&prior, Complex64::new(0.8, -0.2), &model).unwrap();
//! let next = predict_channel(&posterior, &model);
//! assert!(next.norm() < 0.8f64.hypot(0.2));
//! ```

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod kalman;
pub mod metrics;
pub mod protocol;
pub mod quantizer;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
