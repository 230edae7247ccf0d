//! Network autoregressive time series on dynamic networks.
//!
//! Simulation, component-wise least-squares estimation and forecasting of
//! NAR(p) and LNAR(p) processes whose coefficients are modulated by a random,
//! serially dependent network, plus Monte Carlo tooling around them.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::large_enum_variant
)]

pub mod depmeas;
pub mod error;
pub mod estimate;
pub mod forecast;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod netdyn;
pub mod presets;
pub mod rng;

pub use error::{Error, Result};
