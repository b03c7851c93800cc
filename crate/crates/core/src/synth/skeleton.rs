use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::params::{CameraParams, HandParams, ARTICULATION_DIMS};
use crate::depth::{joint, Pose};
use crate::{Error, Result};

const HAND_SKELETON_JSON: &str = include_str!("../../data/skeleton.json");

/// One joint of a capsule skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest offset from the parent, expressed in the parent's frame (mm).
    pub offset: [f64; 3],
    /// Radius of the capsule spanning parent -> this joint (mm).
    pub radius: f64,
    /// Finger whose length and thickness multipliers apply to the incoming bone.
    pub finger: Option<usize>,
    /// Articulation segment rotating everything below this joint.
    pub segment: Option<usize>,
}

/// Tree of joints with rest offsets and capsule radii; the stand-in for a hand mesh template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTopology {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    joints: Vec<JointSpec>,
}

impl SkeletonTopology {
    /// Checks that joints form a tree rooted at index 0 with parents listed before children.
    pub fn new(joints: Vec<JointSpec>) -> Result<Self> {
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::domain("joint 0 must be the root")),
                (_, None) => {
                    return Err(Error::domain(format!("joint {i} ({}) has no parent", j.name)))
                }
                (_, Some(p)) if p >= i => {
                    return Err(Error::domain(format!(
                        "joint {i} ({}) has parent {p}; parents must precede children",
                        j.name
                    )))
                }
                _ => {}
            }
            if !(j.radius >= 0.0) || !j.offset.iter().all(|o| o.is_finite()) {
                return Err(Error::domain(format!("joint {i} ({}) has invalid geometry", j.name)));
            }
            if j.finger.is_some_and(|f| f >= joint::FINGERS) {
                return Err(Error::domain(format!("joint {i} names finger >= 5")));
            }
            if j.segment.is_some_and(|s| 3 * s + 3 > ARTICULATION_DIMS) {
                return Err(Error::domain(format!("joint {i} names segment >= 15")));
            }
        }
        Ok(Self {
            description: None,
            joints,
        })
    }

    /// A skeleton with no joints and therefore no bones.
    pub fn empty() -> Self {
        Self {
            description: None,
            joints: Vec::new(),
        }
    }

    /// The shipped 21-joint right hand.
    pub fn hand() -> Self {
        Self::from_json(HAND_SKELETON_JSON).expect("bundled skeleton is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SkeletonTopology = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "skeleton",
            path: "<inline>".into(),
            msg: e.to_string(),
        })?;
        let mut topo = Self::new(raw.joints)?;
        topo.description = raw.description;
        Ok(topo)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format { what, msg, .. } => Error::Format {
                what,
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// `(parent, child)` index pairs, one per bone.
    pub fn bones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.joints
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.parent.map(|p| (p, i)))
    }

    /// Capsule radius of the bone ending at `child` after the shape's thickness multiplier.
    pub fn bone_radius(&self, child: usize, shape: &[f64]) -> f64 {
        let j = &self.joints[child];
        let thickness = j.finger.map_or(1.0, |f| shape[5 + f]);
        j.radius * thickness
    }

    /// Whether `node` lies in the subtree rooted at `root` (inclusive).
    pub fn is_descendant(&self, node: usize, root: usize) -> bool {
        let mut cur = Some(node);
        while let Some(c) = cur {
            if c == root {
                return true;
            }
            cur = self.joints[c].parent;
        }
        false
    }

    /// Joint positions in the canonical frame for the given articulation and shape.
    pub fn pose_joints(&self, articulation: &[f64], shape: &[f64]) -> Vec<Vector3<f64>> {
        let mut positions = Vec::with_capacity(self.joints.len());
        let mut frames: Vec<Rotation3<f64>> = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let (pos, parent_frame) = match j.parent {
                None => (Vector3::from(j.offset), Rotation3::identity()),
                Some(p) => {
                    let length = j.finger.map_or(1.0, |f| shape[f]);
                    let offset = Vector3::from(j.offset) * length;
                    (positions[p] + frames[p] * offset, frames[p])
                }
            };
            let frame = match j.segment {
                Some(s) => {
                    let aa = Vector3::new(
                        articulation[3 * s],
                        articulation[3 * s + 1],
                        articulation[3 * s + 2],
                    );
                    parent_frame * Rotation3::new(aa)
                }
                None => parent_frame,
            };
            positions.push(pos);
            frames.push(frame);
        }
        positions
    }
}

/// Canonical-frame joint positions of the hand described by `params`.
pub fn forward_kinematics(params: &HandParams, topo: &SkeletonTopology) -> Result<Pose> {
    params.validate()?;
    Pose::new(topo.pose_joints(&params.articulation, &params.shape))
}

/// Maps canonical points into the camera frame: `p -> scale * R(q) * p + t`.
pub fn apply_camera(pose: &Pose, camera: &CameraParams) -> Result<Pose> {
    let q = camera.unit_rotation()?;
    let t = camera.translation_vector();
    pose.map(|p| q * p * camera.scale + t)
}

/// Forward kinematics followed by the camera transform.
pub fn camera_pose(params: &HandParams, topo: &SkeletonTopology) -> Result<Pose> {
    apply_camera(&forward_kinematics(params, topo)?, &params.camera())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn rest() -> Vec<Vector3<f64>> {
        // accumulate offsets without any rotation
        let topo = SkeletonTopology::hand();
        let mut out: Vec<Vector3<f64>> = Vec::new();
        for j in topo.joints() {
            let base = j.parent.map_or(Vector3::zeros(), |p| out[p]);
            out.push(base + Vector3::from(j.offset));
        }
        out
    }

    #[test]
    fn bundled_hand_is_a_21_joint_tree() {
        let topo = SkeletonTopology::hand();
        assert_eq!(topo.len(), 21);
        assert_eq!(topo.bones().count(), 20);
        for (i, j) in topo.joints().iter().enumerate() {
            assert_eq!(j.name, joint::NAMES[i]);
        }
    }

    #[test]
    fn malformed_topologies_are_rejected() {
        let spec = |parent| JointSpec {
            name: "j".into(),
            parent,
            offset: [0.0; 3],
            radius: 1.0,
            finger: None,
            segment: None,
        };
        assert!(SkeletonTopology::new(vec![spec(Some(0))]).is_err());
        assert!(SkeletonTopology::new(vec![spec(None), spec(None)]).is_err());
        assert!(SkeletonTopology::new(vec![spec(None), spec(Some(1))]).is_err());
        assert!(SkeletonTopology::new(vec![spec(None), spec(Some(0))]).is_ok());
    }

    #[test]
    fn zero_articulation_gives_rest_pose() {
        let topo = SkeletonTopology::hand();
        let pose = forward_kinematics(&HandParams::neutral(), &topo).unwrap();
        for (a, b) in pose.joints().iter().zip(rest()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn doubling_lengths_doubles_tip_distances() {
        let topo = SkeletonTopology::hand();
        let mut p = HandParams::neutral();
        p.shape[..5].iter_mut().for_each(|s| *s = 1.99);
        let scaled = forward_kinematics(&p, &topo).unwrap();
        let base = forward_kinematics(&HandParams::neutral(), &topo).unwrap();
        for f in 0..5 {
            let tip = joint::tip(f);
            let ratio = scaled.joints()[tip].norm() / base.joints()[tip].norm();
            assert_relative_eq!(ratio, 1.99, epsilon = 1e-12);
        }
    }

    #[test]
    fn index_proximal_rotation_moves_only_its_subtree() {
        let topo = SkeletonTopology::hand();
        let base = forward_kinematics(&HandParams::neutral(), &topo).unwrap();
        let mut p = HandParams::neutral();
        let angle = -0.7;
        // segment 3 = index MCP, rotation about x
        p.articulation[3 * 3] = angle;
        let moved = forward_kinematics(&p, &topo).unwrap();

        let pivot = base.joints()[joint::mcp(joint::INDEX)];
        let r = Rotation3::from_axis_angle(&Vector3::x_axis(), angle);
        for i in 0..21 {
            let expected = if (joint::of(joint::INDEX, 1)..=joint::tip(joint::INDEX)).contains(&i) {
                pivot + r * (base.joints()[i] - pivot)
            } else {
                base.joints()[i]
            };
            assert_relative_eq!(moved.joints()[i], expected, epsilon = 1e-9);
        }
        assert!((moved.joints()[joint::tip(joint::INDEX)] - base.joints()[joint::tip(joint::INDEX)]).norm() > 10.0);
    }

    #[test]
    fn articulation_only_moves_descendants() {
        let topo = SkeletonTopology::hand();
        let base = forward_kinematics(&HandParams::neutral(), &topo).unwrap();
        for seg_joint in (0..21).filter(|&i| topo.joints()[i].segment.is_some()) {
            let s = topo.joints()[seg_joint].segment.unwrap();
            let mut p = HandParams::neutral();
            p.articulation[3 * s..3 * s + 3].copy_from_slice(&[0.3, -0.4, 0.5]);
            let moved = forward_kinematics(&p, &topo).unwrap();
            for i in 0..21 {
                if i == seg_joint || !topo.is_descendant(i, seg_joint) {
                    assert_eq!(moved.joints()[i], base.joints()[i], "joint {i} moved for segment {s}");
                }
            }
        }
    }

    #[test]
    fn bone_lengths_follow_shape_scales() {
        let topo = SkeletonTopology::hand();
        let mut p = HandParams::neutral();
        p.shape = [1.1, 0.9, 1.2, 0.8, 1.05, 1.0, 1.0, 1.0, 1.0, 1.0];
        p.articulation.iter_mut().enumerate().for_each(|(i, a)| *a = 0.05 * (i as f64).sin());
        let pose = forward_kinematics(&p, &topo).unwrap();
        for (parent, child) in topo.bones() {
            let j = &topo.joints()[child];
            let rest_len = Vector3::from(j.offset).norm();
            let len = (pose.joints()[child] - pose.joints()[parent]).norm();
            assert_relative_eq!(len, rest_len * p.shape[j.finger.unwrap()], epsilon = 1e-9);
        }
    }

    #[test]
    fn camera_transform_examples() {
        let topo = SkeletonTopology::hand();
        let pose = forward_kinematics(&HandParams::neutral(), &topo).unwrap();
        let same = apply_camera(&pose, &CameraParams::identity()).unwrap();
        assert_eq!(same, pose);

        let mut doubled = CameraParams::identity();
        doubled.scale = 2.0;
        let out = apply_camera(&pose, &doubled).unwrap();
        for (a, b) in out.joints().iter().zip(pose.joints()) {
            assert_eq!(*a, b * 2.0);
        }

        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let rot = CameraParams {
            scale: 1.0,
            translation: [0.0; 3],
            rotation: [q.w, q.i, q.j, q.k],
        };
        let mut joints = vec![Vector3::zeros(); 21];
        joints[1] = Vector3::new(1.0, 0.0, 0.0);
        let out = apply_camera(&Pose::new(joints).unwrap(), &rot).unwrap();
        assert_relative_eq!(out.joints()[1], Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn non_unit_quaternion_is_a_domain_error() {
        let pose = Pose::new(vec![Vector3::zeros(); 21]).unwrap();
        let mut cam = CameraParams::identity();
        cam.rotation = [2.0, 0.0, 0.0, 0.0];
        assert!(matches!(apply_camera(&pose, &cam), Err(Error::Domain(_))));
    }
}
