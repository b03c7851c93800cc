//! Mean 3D joint error and the five score axes: extrapolation (total),
//! interpolation, articulation, viewpoint and shape.
//!
//! Which test frames count as extrapolation is decided by a [`SplitSpec`]:
//! an explicit rule over the generating parameters, so the same split both
//! excludes regions from training and tags test frames.

use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::depth::Pose;
use crate::synth::{HandParams, ARTICULATION_DIMS};
use crate::{Error, Result};

/// Mean over frames and joints of the Euclidean joint distance (mm).
pub fn mean_joint_error(preds: &[Pose], gts: &[Pose]) -> Result<f64> {
    let (sum, count) = error_sum(preds, gts, |_| true)?;
    if count == 0 {
        return Err(Error::domain("mean error of zero frames"));
    }
    Ok(sum / count as f64)
}

/// Sum of joint distances over frames selected by `keep`, and the joint count.
fn error_sum(preds: &[Pose], gts: &[Pose], keep: impl Fn(usize) -> bool) -> Result<(f64, usize)> {
    if preds.len() != gts.len() {
        return Err(Error::domain(format!("{} predictions for {} ground-truth frames", preds.len(), gts.len())));
    }
    let (mut sum, mut count) = (0.0, 0);
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if p.joint_count() != g.joint_count() {
            return Err(Error::domain(format!(
                "frame {i}: {} predicted vs {} ground-truth joints",
                p.joint_count(),
                g.joint_count()
            )));
        }
        if keep(i) {
            sum += p.joints().iter().zip(g.joints()).map(|(a, b)| (a - b).norm()).sum::<f64>();
            count += p.joint_count();
        }
    }
    Ok((sum, count))
}

/// Camera rotations within `radius` radians of `axis` are held out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewpointCone {
    /// Unit quaternion `[w, x, y, z]`.
    pub axis: [f64; 4],
    pub radius: f64,
}

/// Frames whose articulation value `index` lies in `range` are held out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArticulationRegion {
    pub index: usize,
    pub range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub viewpoint_cones: Vec<ViewpointCone>,
    pub articulation_regions: Vec<ArticulationRegion>,
    /// Subjects whose hand shape never appears in training.
    pub held_out_shapes: Vec<u32>,
    pub seed: u64,
}

/// Rotation angle between two unit quaternions, in `[0, pi]`.
pub fn rotation_angle(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    2.0 * dot.abs().min(1.0).acos()
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for c in &self.viewpoint_cones {
            let n = Quaternion::new(c.axis[0], c.axis[1], c.axis[2], c.axis[3]).norm();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::domain(format!("cone axis {:?} is not a unit quaternion", c.axis)));
            }
            if !(c.radius > 0.0 && c.radius < std::f64::consts::PI) {
                return Err(Error::domain(format!("cone radius {} outside (0, pi)", c.radius)));
            }
        }
        for r in &self.articulation_regions {
            let pi = std::f64::consts::PI;
            if r.index >= ARTICULATION_DIMS {
                return Err(Error::domain(format!("articulation index {} >= {ARTICULATION_DIMS}", r.index)));
            }
            if !(-pi <= r.range[0] && r.range[0] <= r.range[1] && r.range[1] <= pi) {
                return Err(Error::domain(format!("articulation interval {:?} outside [-pi, pi]", r.range)));
            }
        }
        Ok(())
    }

    pub fn in_viewpoint_region(&self, p: &HandParams) -> bool {
        self.viewpoint_cones.iter().any(|c| rotation_angle(&p.cam_rotation, &c.axis) <= c.radius)
    }

    pub fn in_articulation_region(&self, p: &HandParams) -> bool {
        self.articulation_regions
            .iter()
            .any(|r| (r.range[0]..=r.range[1]).contains(&p.articulation[r.index]))
    }

    pub fn in_shape_region(&self, subject: Option<u32>) -> bool {
        subject.is_some_and(|s| self.held_out_shapes.contains(&s))
    }

    /// True when any held-out region contains the frame.
    pub fn is_held_out(&self, p: &HandParams, subject: Option<u32>) -> bool {
        self.in_viewpoint_region(p) || self.in_articulation_region(p) || self.in_shape_region(subject)
    }

    /// A split holding out a cone of viewpoints, strong index-finger MCP
    /// flexion and one subject.
    pub fn toy() -> Self {
        // palm toward the camera, tilted 0.55 rad about the hand's x axis
        let base = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::PI);
        let tilt = UnitQuaternion::from_euler_angles(0.55, 0.0, 0.0);
        let q = base * tilt;
        Self {
            viewpoint_cones: vec![ViewpointCone { axis: [q.w, q.i, q.j, q.k], radius: 0.35 }],
            articulation_regions: vec![ArticulationRegion { index: 9, range: [-1.3, -1.05] }],
            held_out_shapes: vec![9],
            seed: 0,
        }
    }
}

/// Score axes a frame contributes to. The three region flags imply
/// `extrapolation`; a frame may sit in several regions at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameTags {
    pub interpolation: bool,
    pub extrapolation: bool,
    pub articulation: bool,
    pub viewpoint: bool,
    pub shape: bool,
}

pub fn tag_frame(p: &HandParams, subject: Option<u32>, spec: &SplitSpec) -> FrameTags {
    let viewpoint = spec.in_viewpoint_region(p);
    let articulation = spec.in_articulation_region(p);
    let shape = spec.in_shape_region(subject);
    let extrapolation = viewpoint || articulation || shape;
    FrameTags { interpolation: !extrapolation, extrapolation, articulation, viewpoint, shape }
}

pub fn tag_frames(params: &[HandParams], subjects: &[Option<u32>], spec: &SplitSpec) -> Result<Vec<FrameTags>> {
    spec.validate()?;
    if params.len() != subjects.len() {
        return Err(Error::domain("one subject entry per frame is required"));
    }
    Ok(params.iter().zip(subjects).map(|(p, s)| tag_frame(p, *s, spec)).collect())
}

/// Per-axis frame counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AxisCounts {
    pub total: usize,
    pub extrapolation: usize,
    pub interpolation: usize,
    pub articulation: usize,
    pub viewpoint: usize,
    pub shape: usize,
}

/// Mean joint error per axis (mm); axes without frames are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub overall: Option<f64>,
    pub extrapolation: Option<f64>,
    pub interpolation: Option<f64>,
    pub articulation: Option<f64>,
    pub viewpoint: Option<f64>,
    pub shape: Option<f64>,
    pub counts: AxisCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

pub fn axis_scores(preds: &[Pose], gts: &[Pose], tags: &[FrameTags]) -> Result<AxisReport> {
    if tags.len() != gts.len() {
        return Err(Error::domain(format!("{} tags for {} frames", tags.len(), gts.len())));
    }
    let axis = |sel: fn(&FrameTags) -> bool| -> Result<(Option<f64>, usize)> {
        let (sum, joints) = error_sum(preds, gts, |i| sel(&tags[i]))?;
        let frames = tags.iter().filter(|t| sel(t)).count();
        Ok(((joints > 0).then(|| sum / joints as f64), frames))
    };
    let (overall, total) = axis(|_| true)?;
    let (extrapolation, ne) = axis(|t| t.extrapolation)?;
    let (interpolation, ni) = axis(|t| t.interpolation)?;
    let (articulation, na) = axis(|t| t.articulation)?;
    let (viewpoint, nv) = axis(|t| t.viewpoint)?;
    let (shape, ns) = axis(|t| t.shape)?;
    Ok(AxisReport {
        overall,
        extrapolation,
        interpolation,
        articulation,
        viewpoint,
        shape,
        counts: AxisCounts {
            total,
            extrapolation: ne,
            interpolation: ni,
            articulation: na,
            viewpoint: nv,
            shape: ns,
        },
        config_digest: None,
    })
}

impl AxisReport {
    fn rows(&self) -> [(&'static str, Option<f64>, usize); 6] {
        let c = &self.counts;
        [
            ("Extrapolation", self.extrapolation, c.extrapolation),
            ("Interpolation", self.interpolation, c.interpolation),
            ("Articulation", self.articulation, c.articulation),
            ("Viewpoint", self.viewpoint, c.viewpoint),
            ("Shape", self.shape, c.shape),
            ("Overall", self.overall, c.total),
        ]
    }

    /// Aligned plain-text table; absent axes print as `-`.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<14} {:>10} {:>8}\n", "axis", "error_mm", "frames");
        for (name, err, n) in self.rows() {
            let err = err.map_or_else(|| "-".to_string(), |e| format!("{e:.2}"));
            let _ = writeln!(out, "{name:<14} {err:>10} {n:>8}");
        }
        if let Some(d) = &self.config_digest {
            let _ = writeln!(out, "config {d}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Hex SHA-256 of `bytes`, used to tie reports and models to their configuration.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
