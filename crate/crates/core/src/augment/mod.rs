//! Augmentation operators: pose-driven 3D crop refinement, real/synthetic
//! blending, and assembly of the real (RD), synthetic (SD), mixed (MD) and
//! noised (ND) training sets.

mod blend;
mod dataset;
mod refine;

pub use blend::blend;
pub use dataset::{
    build_dataset, capture_seed, plan_frames, render_plan, ConcatSource, DatasetManifest, Frame, FramePlan,
    FrameSource, Hint, HintConfig, ManifestEntry, ManifestSource, NoiseConfig, PlanSource,
    RealFrameFiles, RealFrames, RenderSetup, SimulatedCaptures, Strategy,
};
pub use refine::{expand_bbox, filter_to_box, pose_bbox, refine_patch, CropBox, RefineConfig};
