#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod opa;
pub mod outage;
pub mod rate;
pub mod scenario;
pub mod selftest;
pub mod sensing;
pub mod sinr;
pub mod specfun;

pub use error::{Error, Result};
