//! Stochastic heavy ball (SHB) with momentum-corrected Polyak step-sizes.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`problems`]: finite-sum objectives, synthetic generators and certified
//!   reference quantities (`x*`, `f*`, smoothness, `σ²`).
//! - [`stepsizes`]: stateful Polyak-type step-size policies (SPS_max, DecSPS,
//!   AdaSPS, their momentum-corrected versions and a few comparison rules).
//! - [`optimizers`]: SHB, IMA and projected IMA iteration engines plus the
//!   seeded run loop.
//! - [`bounds`]: closed-form convergence bounds and the empirical checks
//!   (bound comparison, log-log slope fits, finite-difference gradients).
//!
//! File formats, the multi-seed runner and the CLI live in the `momsps` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod error;
pub mod linalg;
mod math;
pub mod optimizers;
pub mod problems;
pub mod stepsizes;

pub use error::{Error, Result};
