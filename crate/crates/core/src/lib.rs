//! Event-driven simulation of one-dimensional three-state contact processes.
//!
//! Every process is driven by a [`graphical::Construction`]: a family of
//! Poisson clocks (arrows and recovery marks) whose event times are a pure
//! function of a master seed and the clock identity. Processes that share a
//! construction are coupled pathwise, which is what the checks in
//! [`coupling`], [`regeneration`] and [`speedcomp`] rely on.
//!
//! The crate is `no_std` and needs only `alloc`.
#![cfg_attr(not(test), no_std)]
// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coupling;
pub mod error;
pub mod graphical;
pub mod percolation;
pub mod processes;
pub mod regeneration;
pub mod replicas;
pub mod rng;
pub mod speedcomp;
pub mod stats;
pub mod subcritical;

pub use error::{Error, Result};
