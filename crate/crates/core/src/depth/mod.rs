//! Depth images, pinhole camera geometry, joint poses and normalized patches.
//!
//! Every other module builds on these types. All of them are immutable once
//! constructed; the operations here are pure functions.

mod camera;
mod image;
mod patch;
mod pgm;
mod pose;

pub use camera::{backproject, project, CameraIntrinsics};
pub use image::DepthImage;
pub use patch::{crop_patch, Patch, DEFAULT_CUBE_SIZE};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use pose::{joint, Pose};
