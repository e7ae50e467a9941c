//! Decayed-MCMC filtering for partially observable Markov processes.
//!
//! Filtering asks for the belief state P(X_T | y_1:T) of a hidden Markov
//! process as observations arrive. This crate estimates it by Gibbs sampling
//! over complete state trajectories, with the slice to resample drawn from a
//! *decay schedule* that favours the recent past — concentrating work where
//! it matters for the current state and keeping the per-update cost
//! independent of the history length.
//!
//! The crate ships:
//!
//! * [`models`] — discrete hidden Markov models: validation, synthetic
//!   generation with a sharpness knob, simulation, and a value-exact file
//!   format.
//! * [`exact`] — forward filtering, forward-backward smoothing, and
//!   brute-force trajectory enumeration: the ground truth for every error
//!   measurement.
//! * [`decay`] — the uniform, fixed-window, exponential, and
//!   inverse-polynomial decay families with a seedable timeslice sampler.
//! * [`dmcmc`] — the trajectory-space Gibbs chain with online evidence
//!   ingestion and count-based belief extraction.
//! * [`pfilter`] — a bootstrap particle filter baseline over anything
//!   implementing the simulable contract.
//! * [`skf`] — a switching Kalman filter model with closed-form Gibbs
//!   conditionals and its own decayed chain.
//! * [`diagnostics`] — total variation distance, the mixing parameter η,
//!   and empirical marginal mixing-time estimation.
//!
//! ```
//! use decfilt_core::decay::DecaySchedule;
//! use decfilt_core::diagnostics::tv_distance;
//! use decfilt_core::dmcmc::{Chain, ChainConfig};
//! use decfilt_core::exact::forward_filter;
//! use decfilt_core::models::DiscreteHMM;
//!
//! let model = DiscreteHMM::from_tables(
//!     2,
//!     2,
//!     vec![0.5, 0.5],
//!     vec![0.7, 0.3, 0.3, 0.7],
//!     vec![0.8, 0.2, 0.2, 0.8],
//! )
//! .unwrap();
//!
//! let config = ChainConfig::new(20_000, 0, DecaySchedule::quadratic(), 7).unwrap();
//! let mut chain = Chain::new(&model, config);
//! for &y in &[0, 0, 1, 0] {
//!     chain.observe(&model, y).unwrap();
//! }
//!
//! let exact = forward_filter(&model, &[0, 0, 1, 0]).unwrap();
//! let err = tv_distance(&chain.estimate().unwrap(), exact.beliefs.last().unwrap()).unwrap();
//! assert!(err < 0.05);
//! ```

pub mod decay;
pub mod diagnostics;
pub mod dmcmc;
mod error;
pub mod exact;
pub mod models;
pub mod pfilter;
pub mod rng;
pub mod skf;

pub use error::{Error, Result};
