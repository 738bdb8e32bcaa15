//! Security-aware incentive design for device-to-device computation
//! offloading.
//!
//! Strategic user equipments (UEs) serve offloading requests for a
//! throttled linear reward while facing an SIS-style infection risk from
//! compromised requesters. This crate contains:
//!
//! * [`model`]: domain types, instantaneous and foresighted utilities.
//! * [`bestresp`]: individual best-response participation.
//! * [`epidemic`]: mean-field SIS dynamics and steady states.
//! * [`equilibrium`]: Nash equilibrium of the K-type participation game.
//! * [`reward`]: operator-side reward optimisation.
//! * [`abm`]: discrete-time agent-based simulator used to validate the
//!   mean-field predictions.
//!
//! The crate is `no_std` (with `alloc`); IO and file formats live in the
//! companion `d2dsec` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod abm;
pub mod bestresp;
pub mod epidemic;
pub mod equilibrium;
mod error;
pub(crate) mod math;
pub mod model;
pub mod reward;
pub mod solve;

pub use error::{Clause, Error, Result};
pub use model::{EvaluationFunction, Market, OperatorParams, RewardScheme, RiskEnv, UeType};
pub use solve::Tolerance;
