//! Parametric hand model and depth renderer.
//!
//! Hands are capsule skeletons driven by the same 8/45/10 camera, articulation
//! and shape parameter layout a mesh hand model would use. Rendering is a
//! ray-capsule z-buffer, so every synthetic image comes with exact joint
//! ground truth.

mod params;
mod render;
mod scene;
mod skeleton;

pub use params::{
    sample_noised_params, CameraParams, HandParams, NoiseSubset, ParamStats, ARTICULATION_DIMS,
    CAMERA_DIMS, PARAM_DIMS, SHAPE_DIMS, SHAPE_RANGE,
};
pub use render::{rasterize_capsules, render_depth, skeleton_capsules, Capsule};
pub use scene::{
    generate_corpus, render_capture, render_hand, sample_hand, subject_shape, CorpusConfig,
    CorpusRecord, SceneConfig,
};
pub use skeleton::{apply_camera, camera_pose, forward_kinematics, JointSpec, SkeletonTopology};
