//! Synthetic depth-image hand pose estimation.
//!
//! The crate covers the whole loop of a data-augmentation study for depth-based
//! hand pose regression:
//!
//! * [`depth`]: depth images, pinhole geometry, joint poses and normalized patches;
//! * [`synth`]: a capsule-skeleton hand model, its renderer and a simulated sensor;
//! * [`augment`]: pose-driven 3D crop refinement, real/synthetic blending and
//!   dataset assembly for the real, synthetic, mixed and noised strategies;
//! * [`wing`]: the Wing loss and its gradient;
//! * [`regressor`]: a small MLP pose regressor trained with Adamax;
//! * [`pipeline`]: the two-stage crop, predict, refine, predict scheme;
//! * [`eval`]: mean joint error and the five extrapolation/interpolation axes;
//! * [`bench`]: a desk-scale ablation benchmark built from the pieces above;
//! * [`cli`]: the `handforge` command line.

// `!(x > 0.0)` is used on purpose: NaN must fail every domain check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod bench;
pub mod cli;
pub mod depth;
mod error;
pub mod eval;
pub mod pipeline;
pub mod regressor;
pub mod seed;
pub mod synth;
pub mod wing;

pub use error::{Error, Result};
