//! Capacity and delay toolkit for multi-channel wireless networks with
//! infrastructure support.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod harness;
pub mod interference;
pub mod math;
pub mod routing;
pub mod scheduling;
pub mod topology;
pub mod verify;
