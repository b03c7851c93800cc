//! The two-stage scheme: a coarse crop around the hint feeds the first
//! network, its pose bounds a refined crop, and the second network predicts
//! the final pose from that crop.

mod bundle;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bundle::{load_bundle, save_bundle, ModelMetadata};

use crate::augment::{refine_patch, FrameSource, Hint, RefineConfig};
use crate::depth::{backproject, crop_patch, joint, CameraIntrinsics, DepthImage, Patch, Pose, DEFAULT_CUBE_SIZE};
use crate::regressor::{encode_patch, fine_tune, train, EpochStats, Regressor, Sample, TrainConfig};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// Crop and input geometry shared by both stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recipe {
    /// Side of the stage-one crop cube (mm).
    pub cube_size: f64,
    /// Resolution patches are resampled to before downsampling.
    pub patch_res: usize,
    /// Side of the network's square input.
    pub input_res: usize,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            cube_size: DEFAULT_CUBE_SIZE,
            patch_res: 224,
            input_res: 32,
        }
    }
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        if !(self.cube_size > 0.0) || self.patch_res == 0 || self.input_res == 0 {
            return Err(Error::domain(format!("invalid recipe {self:?}")));
        }
        Ok(())
    }

    /// Layer sizes of a network for this recipe with the given hidden layers.
    pub fn layer_sizes(&self, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![self.input_res * self.input_res];
        sizes.extend_from_slice(hidden);
        sizes.push(3 * joint::COUNT);
        sizes
    }

    fn check_net(&self, net: &Regressor) -> Result<()> {
        if net.input_dim() != self.input_res * self.input_res || net.output_dim() != 3 * joint::COUNT {
            return Err(Error::shape(format!(
                "network {:?} does not fit a {r}x{r} input and {} outputs",
                net.sizes(),
                3 * joint::COUNT,
                r = self.input_res
            )));
        }
        Ok(())
    }
}

/// Both networks plus the geometry they were trained with. Without `net2`
/// the model is single-stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    pub net1: Regressor,
    pub net2: Option<Regressor>,
    pub recipe: Recipe,
    pub refine: RefineConfig,
}

impl TwoStageModel {
    pub fn validate(&self) -> Result<()> {
        self.recipe.validate()?;
        self.refine.validate()?;
        self.recipe.check_net(&self.net1)?;
        if let Some(n2) = &self.net2 {
            self.recipe.check_net(n2)?;
        }
        Ok(())
    }
}

/// Final pose and every intermediate of one two-stage inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub pose: Pose,
    pub pose1: Pose,
    pub patch1: Patch,
    /// Equals `patch1` when the model is single-stage or refinement kept no pixel.
    pub patch2: Patch,
    pub refined: bool,
}

/// Maps normalized network output back to camera space (mm).
pub fn denormalize_pose(pred: &[f64], patch: &Patch) -> Result<Pose> {
    if !pred.len().is_multiple_of(3) {
        return Err(Error::shape(format!("{} values are not a list of 3D joints", pred.len())));
    }
    Pose::new(
        pred.chunks_exact(3)
            .map(|c| patch.denormalize_point(&Vector3::new(c[0], c[1], c[2])))
            .collect(),
    )
}

/// Inverse of [`denormalize_pose`].
pub fn normalize_pose(pose: &Pose, patch: &Patch) -> Vec<f64> {
    pose.joints().iter().flat_map(|j| {
        let n = patch.normalize_point(j);
        [n.x, n.y, n.z]
    })
    .collect()
}

/// 3D crop center of a hint. A box resolves to its center pixel at the
/// median valid depth inside it.
pub fn resolve_hint(img: &DepthImage, hint: &Hint, k: &CameraIntrinsics) -> Result<Vector3<f64>> {
    match *hint {
        Hint::Mcp(p) => {
            let v = Vector3::from(p);
            if !(v.z > 0.0) || !v.iter().all(|c| c.is_finite()) {
                return Err(Error::Inference(format!("MCP hint {p:?} is not in front of the camera")));
            }
            Ok(v)
        }
        Hint::Bbox([u0, v0, u1, v1]) => {
            let (ulo, uhi) = (u0.min(u1).max(0.0).ceil() as usize, u0.max(u1).floor());
            let (vlo, vhi) = (v0.min(v1).max(0.0).ceil() as usize, v0.max(v1).floor());
            let mut depths = Vec::new();
            if uhi >= 0.0 && vhi >= 0.0 {
                let uhi = (uhi as usize).min(img.width().saturating_sub(1));
                let vhi = (vhi as usize).min(img.height().saturating_sub(1));
                for v in vlo..=vhi {
                    for u in ulo..=uhi {
                        let d = img.get(u, v);
                        if d > 0.0 {
                            depths.push(d);
                        }
                    }
                }
            }
            if depths.is_empty() {
                return Err(Error::Inference(format!("no valid depth inside the box {:?}", [u0, v0, u1, v1])));
            }
            depths.sort_by(f64::total_cmp);
            let n = depths.len();
            let median = if n % 2 == 1 { depths[n / 2] } else { 0.5 * (depths[n / 2 - 1] + depths[n / 2]) };
            backproject(0.5 * (u0 + u1), 0.5 * (v0 + v1), median, k)
        }
    }
}

fn frame_center(hint: Option<&Hint>, img: &DepthImage, gt: &Pose, k: &CameraIntrinsics) -> Result<Vector3<f64>> {
    match hint {
        Some(h) => resolve_hint(img, h, k),
        None => Ok(gt.joints()[joint::MIDDLE_MCP]),
    }
}

pub fn stage1_patch(img: &DepthImage, center: &Vector3<f64>, recipe: &Recipe, k: &CameraIntrinsics) -> Result<Patch> {
    crop_patch(img, center, recipe.cube_size, k, recipe.patch_res)
}

/// Network prediction for a patch, in camera space.
pub fn predict(net: &Regressor, patch: &Patch) -> Result<Pose> {
    denormalize_pose(&net.forward_patch(patch)?, patch)
}

/// Runs both stages. Falls back to the stage-one patch when refinement
/// leaves nothing to crop, so a pose is always produced.
pub fn infer_two_stage(model: &TwoStageModel, img: &DepthImage, hint: &Hint, k: &CameraIntrinsics) -> Result<Inference> {
    model.validate()?;
    let center = resolve_hint(img, hint, k)?;
    let patch1 = stage1_patch(img, &center, &model.recipe, k).map_err(|e| Error::Inference(e.to_string()))?;
    let pose1 = predict(&model.net1, &patch1)?;
    let Some(net2) = &model.net2 else {
        return Ok(Inference { pose: pose1.clone(), pose1, patch2: patch1.clone(), patch1, refined: false });
    };
    let (patch2, refined) = match refine_patch(img, &pose1, &model.refine, k, model.recipe.patch_res) {
        Ok(p) => (p, true),
        Err(Error::EmptyPatch(_)) => (patch1.clone(), false),
        Err(e) => return Err(e),
    };
    let pose = predict(net2, &patch2)?;
    Ok(Inference { pose, pose1, patch1, patch2, refined })
}

fn sample(patch: &Patch, gt: &Pose, recipe: &Recipe) -> Sample {
    Sample {
        input: encode_patch(patch, recipe.input_res),
        target: normalize_pose(gt, patch),
        unit: patch.half_cube(),
    }
}

/// Stage-one training examples, one per frame, in frame order.
pub fn stage1_samples(source: &dyn FrameSource, recipe: &Recipe, k: &CameraIntrinsics) -> Result<Vec<Sample>> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let f = source.frame(i)?;
            let center = frame_center(f.hint.as_ref(), &f.image, &f.pose, k)?;
            Ok(sample(&stage1_patch(&f.image, &center, recipe, k)?, &f.pose, recipe))
        })
        .collect()
}

/// Stage-two training examples: each frame is refined around `net1`'s own
/// prediction, as at inference time.
pub fn stage2_samples(
    source: &dyn FrameSource,
    net1: &Regressor,
    recipe: &Recipe,
    refine: &RefineConfig,
    k: &CameraIntrinsics,
) -> Result<Vec<Sample>> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let f = source.frame(i)?;
            let center = frame_center(f.hint.as_ref(), &f.image, &f.pose, k)?;
            let patch1 = stage1_patch(&f.image, &center, recipe, k)?;
            let pose1 = predict(net1, &patch1)?;
            let patch2 = match refine_patch(&f.image, &pose1, refine, k, recipe.patch_res) {
                Ok(p) => p,
                Err(Error::EmptyPatch(_)) => patch1,
                Err(e) => return Err(e),
            };
            Ok(sample(&patch2, &f.pose, recipe))
        })
        .collect()
}

/// Training setup of both stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageConfig {
    pub recipe: Recipe,
    pub refine: RefineConfig,
    pub hidden: Vec<usize>,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    /// Start the second network from the first one's weights.
    pub fine_tune: bool,
    /// Seed of the network initializations.
    pub seed: u64,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        Self {
            recipe: Recipe::default(),
            refine: RefineConfig::default(),
            hidden: vec![256, 128],
            stage1: TrainConfig::default(),
            stage2: TrainConfig {
                epochs: 10,
                lr_step_epochs: 5,
                learning_rate: 0.0003,
                ..TrainConfig::default()
            },
            fine_tune: true,
            seed: 0,
        }
    }
}

/// Loss traces of a two-stage training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTraces {
    pub stage1: Vec<EpochStats>,
    pub stage2: Vec<EpochStats>,
}

/// Initialization of stage `stage` (1 or 2) under `cfg`.
pub fn init_network(cfg: &TwoStageConfig, stage: u64) -> Result<Regressor> {
    Regressor::init(&cfg.recipe.layer_sizes(&cfg.hidden), derive_seed(cfg.seed, &[stage]))
}

/// Trains the second network on patches refined around `net1`'s predictions.
pub fn train_stage2(
    net1: &Regressor,
    source: &dyn FrameSource,
    cfg: &TwoStageConfig,
    k: &CameraIntrinsics,
) -> Result<(Regressor, Vec<EpochStats>)> {
    let samples = stage2_samples(source, net1, &cfg.recipe, &cfg.refine, k)?;
    if cfg.fine_tune {
        fine_tune(net1, &samples, &cfg.stage2)
    } else {
        train(init_network(cfg, 2)?, &samples, &cfg.stage2)
    }
}

/// Trains the first network on `stage1_data`, then the second on `stage2_data`.
pub fn train_two_stage(
    stage1_data: &dyn FrameSource,
    stage2_data: &dyn FrameSource,
    cfg: &TwoStageConfig,
    k: &CameraIntrinsics,
) -> Result<(TwoStageModel, TrainTraces)> {
    cfg.recipe.validate()?;
    cfg.refine.validate()?;
    if stage1_data.is_empty() || stage2_data.is_empty() {
        return Err(Error::domain("both stages need training frames"));
    }
    let samples = stage1_samples(stage1_data, &cfg.recipe, k)?;
    let (net1, t1) = train(init_network(cfg, 1)?, &samples, &cfg.stage1)?;
    drop(samples);
    let (net2, t2) = train_stage2(&net1, stage2_data, cfg, k)?;
    let model = TwoStageModel { net1, net2: Some(net2), recipe: cfg.recipe, refine: cfg.refine };
    Ok((model, TrainTraces { stage1: t1, stage2: t2 }))
}
