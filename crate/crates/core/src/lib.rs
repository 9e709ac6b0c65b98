//! One-photon-interference quantum secure direct communication (OPI-QSDC)
//! toolkit.
//!
//! * [`params`] physical/protocol constants and the fibre loss model.
//! * [`rates`] closed-form secrecy rates for OPI-QSDC and the DL04 / MDI-QSDC
//!   comparison protocols, plus the PLOB bound.
//! * [`security`] Bell-diagonal eavesdropping bounds and the coherent-state
//!   photon-number decomposition behind the phase-error rate.
//! * [`sim`] pulse-level Monte Carlo of mode preparation, interference,
//!   detection, sifting and parameter estimation.
//! * [`frame`] the frame pipeline: SSTS pool, FEC precoding, wiretap coset
//!   coding, masking and disclosure decoding.
//! * [`sweep`] rate curves, PLOB crossing, maximum distance and intensity
//!   optimisation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod frame;
pub mod params;
pub mod rates;
pub mod security;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
pub use params::SystemParams;
pub use rates::{ComparisonRates, RateBreakdown};
