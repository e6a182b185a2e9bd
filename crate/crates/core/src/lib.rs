//! Linear parameter-varying model predictive control for vehicle path
//! tracking and static obstacle avoidance on a circular road.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod constraints;
pub mod controller;
pub mod error;
pub mod qp;
pub mod reference;
pub mod sim;
pub mod vehicle;

pub use error::{Error, Result};
