//! Parameter priors and the simulated depth sensor that stands in for real captures.
//!
//! A "capture" renders the hand with slightly thicker skin than the proxy model,
//! attaches a forearm, scatters clutter objects around the hand, places a wall
//! behind it and finally applies sensor noise, dropout and millimeter
//! quantization. Clean renders of the same parameters differ from captures in
//! exactly those respects, which is the gap the blending strategy targets.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::params::{HandParams, ARTICULATION_DIMS, SHAPE_DIMS};
use super::render::{rasterize_capsules, skeleton_capsules, Capsule};
use super::skeleton::{camera_pose, SkeletonTopology};
use crate::depth::{joint, CameraIntrinsics, DepthImage, Pose};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// One parameter-corpus line: hand parameters plus the subject they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(flatten)]
    pub params: HandParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<u32>,
}

/// Ranges of the generated parameter corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub subjects: u32,
    /// Std of per-subject bone-length multipliers around 1.
    pub length_sigma: f64,
    pub thickness_sigma: f64,
    /// Maximum tilt of the palm away from the camera (radians).
    pub max_tilt: f64,
    /// Maximum in-plane roll (radians).
    pub max_roll: f64,
    pub scale_sigma: f64,
    /// Middle-MCP position ranges in camera space (mm).
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            subjects: 10,
            length_sigma: 0.07,
            thickness_sigma: 0.08,
            max_tilt: 0.8,
            max_roll: 0.8,
            scale_sigma: 0.03,
            x_range: [-30.0, 30.0],
            y_range: [-25.0, 25.0],
            z_range: [440.0, 560.0],
        }
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Per-subject shape vector, deterministic in `(seed, subject)`.
pub fn subject_shape(cfg: &CorpusConfig, seed: u64, subject: u32) -> [f64; SHAPE_DIMS] {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5ABE, subject as u64]));
    let global_len = Normal::new(1.0, cfg.length_sigma).unwrap().sample(&mut rng);
    let global_thick = Normal::new(1.0, cfg.thickness_sigma).unwrap().sample(&mut rng);
    let mut shape = [1.0; SHAPE_DIMS];
    for f in 0..5 {
        shape[f] = (global_len + rng.random_range(-0.03..0.03)).clamp(0.75, 1.3);
        shape[5 + f] = (global_thick + rng.random_range(-0.04..0.04)).clamp(0.75, 1.3);
    }
    shape
}

/// Draws one plausible right-hand configuration.
pub fn sample_hand(
    cfg: &CorpusConfig,
    shape: [f64; SHAPE_DIMS],
    topo: &SkeletonTopology,
    rng: &mut impl Rng,
) -> HandParams {
    let mut articulation = vec![0.0; ARTICULATION_DIMS];
    let grasp: f64 = rng.random();
    let spread = rng.random::<f64>() * (1.0 - grasp);
    let abduction = [0.0, 0.12, 0.0, -0.1, -0.2];
    for (f, &abd) in abduction.iter().enumerate() {
        let flex = (grasp + 0.25 * rng.random_range(-1.0..1.0f64)).clamp(0.0, 1.0);
        let seg = |k: usize| 3 * (3 * f + k);
        if f == joint::THUMB {
            articulation[seg(0)] = -0.5 * flex;
            articulation[seg(0) + 2] = 0.5 * flex;
            articulation[seg(1)] = -0.6 * flex;
            articulation[seg(2)] = -0.8 * flex;
        } else {
            articulation[seg(0)] = -1.3 * flex;
            articulation[seg(0) + 2] = abd * spread + 0.05 * rng.random_range(-1.0..1.0);
            articulation[seg(1)] = -1.6 * flex * rng.random_range(0.85..1.0);
            articulation[seg(2)] = -flex * rng.random_range(0.8..1.0);
        }
    }

    // fingers point up in the image with the palm toward the camera, then tilt and roll
    let base = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI);
    let tilt_dir = rng.random_range(0.0..2.0 * PI);
    let tilt_axis = nalgebra::Unit::new_normalize(Vector3::new(tilt_dir.cos(), tilt_dir.sin(), 0.0));
    let tilt = UnitQuaternion::from_axis_angle(&tilt_axis, cfg.max_tilt * rng.random::<f64>().sqrt());
    let roll = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.random_range(-cfg.max_roll..=cfg.max_roll));
    let q = roll * base * tilt;

    let scale = (1.0 + cfg.scale_sigma * rng.random_range(-1.7..1.7f64)).max(0.5);
    let mcp_target = Vector3::new(
        uniform(rng, cfg.x_range),
        uniform(rng, cfg.y_range),
        uniform(rng, cfg.z_range),
    );
    let canonical_mcp = topo.pose_joints(&articulation, &shape)[joint::MIDDLE_MCP];
    let t = mcp_target - q * canonical_mcp * scale;
    HandParams {
        cam_scale: scale,
        cam_translation: [t.x, t.y, t.z],
        cam_rotation: [q.w, q.i, q.j, q.k],
        articulation,
        shape,
    }
}

/// Generates `count` corpus records over `cfg.subjects` subjects, rejecting any
/// record for which `reject` returns true. Deterministic in `seed`.
pub fn generate_corpus(
    count: usize,
    cfg: &CorpusConfig,
    topo: &SkeletonTopology,
    seed: u64,
    reject: impl Fn(&HandParams, Option<u32>) -> bool,
) -> Result<Vec<CorpusRecord>> {
    if cfg.subjects == 0 {
        return Err(Error::domain("corpus needs at least one subject"));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let subject = (i as u32) % cfg.subjects;
        let shape = subject_shape(cfg, seed, subject);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xC0C0, i as u64]));
        let mut accepted = None;
        for _ in 0..1000 {
            let p = sample_hand(cfg, shape, topo, &mut rng);
            if !reject(&p, Some(subject)) {
                accepted = Some(p);
                break;
            }
        }
        let params = accepted.ok_or_else(|| {
            Error::domain(format!(
                "could not draw corpus entry {i} outside the held-out regions (subject {subject})"
            ))
        })?;
        out.push(CorpusRecord {
            params,
            subject: Some(subject),
        });
    }
    Ok(out)
}

/// Simulated sensor and scene around the hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub arm: bool,
    pub arm_length: f64,
    pub arm_radius: f64,
    /// Inclusive range of clutter objects per frame.
    pub clutter_count: [u32; 2],
    pub clutter_radius: [f64; 2],
    /// Lateral distance of clutter from the middle MCP (mm).
    pub clutter_distance: [f64; 2],
    /// Depth offset of clutter relative to the middle MCP (mm).
    pub clutter_depth: [f64; 2],
    /// Wall distance behind the middle MCP; `None` leaves the background empty.
    pub wall_offset: Option<[f64; 2]>,
    /// Skin radius multiplier relative to the proxy model.
    pub skin_scale: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            arm: true,
            arm_length: 260.0,
            arm_radius: 27.0,
            clutter_count: [1, 3],
            clutter_radius: [15.0, 35.0],
            clutter_distance: [85.0, 150.0],
            clutter_depth: [-70.0, 50.0],
            wall_offset: Some([250.0, 450.0]),
            skin_scale: 1.08,
            noise_sigma: 1.5,
            dropout: 0.02,
        }
    }
}

/// Clean render of the proxy hand alone. Returns the image and the camera-frame pose.
pub fn render_hand(
    params: &HandParams,
    topo: &SkeletonTopology,
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<(DepthImage, Pose)> {
    let pose = camera_pose(params, topo)?;
    let img = super::render::render_depth(pose.joints(), topo, &params.shape, k, width, height)?;
    Ok((img, pose))
}

/// Simulated sensor capture of the hand inside a cluttered scene.
pub fn render_capture(
    params: &HandParams,
    topo: &SkeletonTopology,
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
    scene: &SceneConfig,
    seed: u64,
) -> Result<(DepthImage, Pose)> {
    let pose = camera_pose(params, topo)?;
    if let Some(j) = pose.joints().iter().find(|j| !(j.z > 0.0)) {
        return Err(Error::domain(format!("joint at z = {} is behind the camera", j.z)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut capsules = skeleton_capsules(pose.joints(), topo, &params.shape)?;
    for c in &mut capsules {
        c.radius *= scene.skin_scale;
    }

    let q = params.camera().unit_rotation()?;
    let wrist = pose.joints()[joint::WRIST];
    if scene.arm {
        // forearm continues from the wrist away from the fingers
        let dir = q * Vector3::new(0.0, -1.0, 0.0);
        let bend = Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.0..0.3));
        let dir = (dir + bend).normalize();
        let elbow = wrist + dir * scene.arm_length;
        let start = wrist + dir * (0.4 * scene.arm_radius);
        if elbow.z - scene.arm_radius > 1.0 {
            capsules.push(Capsule::new(start, elbow, scene.arm_radius));
        }
    }

    let mcp = pose.joints()[joint::MIDDLE_MCP];
    let [lo, hi] = scene.clutter_count;
    let n_clutter = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    for _ in 0..n_clutter {
        let angle = rng.random_range(0.0..2.0 * PI);
        let dist = uniform(&mut rng, scene.clutter_distance);
        let radius = uniform(&mut rng, scene.clutter_radius);
        let center = mcp
            + Vector3::new(
                dist * angle.cos(),
                dist * angle.sin(),
                uniform(&mut rng, scene.clutter_depth),
            );
        if center.z - radius > 1.0 {
            let elongation = Vector3::new(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0), 0.0);
            capsules.push(Capsule::new(center - elongation, center + elongation, radius));
        }
    }

    let mut img = rasterize_capsules(&capsules, k, width, height)?.into_data();
    let wall = scene.wall_offset.map(|range| mcp.z + uniform(&mut rng, range));
    let noise = Normal::new(0.0, scene.noise_sigma.max(0.0)).map_err(|e| Error::domain(e.to_string()))?;
    for d in img.iter_mut() {
        if *d == 0.0 {
            if let Some(w) = wall {
                *d = w;
            }
        }
        if *d > 0.0 {
            if scene.dropout > 0.0 && rng.random::<f64>() < scene.dropout {
                *d = 0.0;
            } else {
                *d = (*d + noise.sample(&mut rng)).round().clamp(1.0, 65535.0);
            }
        }
    }
    Ok((DepthImage::new(width, height, img)?, pose))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(237.5, 237.5, 80.0, 60.0).unwrap()
    }

    #[test]
    fn corpus_is_valid_and_seeded() {
        let topo = SkeletonTopology::hand();
        let cfg = CorpusConfig::default();
        let a = generate_corpus(40, &cfg, &topo, 5, |_, _| false).unwrap();
        let b = generate_corpus(40, &cfg, &topo, 5, |_, _| false).unwrap();
        assert_eq!(a, b);
        for r in &a {
            r.params.validate().unwrap();
            let pose = camera_pose(&r.params, &topo).unwrap();
            let mcp = pose.joints()[joint::MIDDLE_MCP];
            assert!((cfg.z_range[0]..=cfg.z_range[1]).contains(&mcp.z.round()));
        }
        // subjects share their shape
        assert_eq!(a[0].params.shape, a[10].params.shape);
        assert_ne!(a[0].params.shape, a[1].params.shape);
    }

    #[test]
    fn rejection_is_honoured() {
        let topo = SkeletonTopology::hand();
        let cfg = CorpusConfig::default();
        let corpus = generate_corpus(30, &cfg, &topo, 1, |_, s| s == Some(3)).unwrap_err();
        assert!(matches!(corpus, Error::Domain(_)));
        let corpus = generate_corpus(30, &cfg, &topo, 1, |p, _| p.articulation[9] < -0.5).unwrap();
        assert!(corpus.iter().all(|r| r.params.articulation[9] >= -0.5));
    }

    #[test]
    fn capture_contains_hand_and_clutter() {
        let topo = SkeletonTopology::hand();
        let cfg = CorpusConfig::default();
        let corpus = generate_corpus(3, &cfg, &topo, 2, |_, _| false).unwrap();
        let scene = SceneConfig::default();
        let (clean, pose) = render_hand(&corpus[0].params, &topo, &k(), 160, 120).unwrap();
        let (capture, pose2) = render_capture(&corpus[0].params, &topo, &k(), 160, 120, &scene, 9).unwrap();
        assert_eq!(pose, pose2);
        assert!(clean.valid_count() > 500);
        // the wall fills the background apart from dropout
        assert!(capture.valid_count() as f64 > 0.9 * 160.0 * 120.0);
        assert!(capture.data().iter().all(|d| d.fract() == 0.0));
        let again = render_capture(&corpus[0].params, &topo, &k(), 160, 120, &scene, 9).unwrap().0;
        assert_eq!(again, capture);
    }
}
