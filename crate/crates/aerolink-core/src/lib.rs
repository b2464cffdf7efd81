//! RZF precoding, MMSE channel estimation, deterministic-equivalent rate
//! analysis, distance-based ACM design and a Monte-Carlo oracle for
//! air-to-air massive MIMO links.
//!
//! The crate is `no_std` and only needs an allocator. Parallel execution of
//! Monte-Carlo trials is delegated to a [`montecarlo::TrialRunner`].
#![no_std]

extern crate alloc;

pub mod acm;
pub mod channel;
pub mod detequiv;
mod error;
pub mod estimation;
pub mod linalg;
pub mod montecarlo;
pub mod precoding;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
