use nalgebra::Vector3;

use crate::{Error, Result};

/// Canonical 21-joint layout: the wrist (palm root) followed by four joints per
/// finger in the order thumb, index, middle, ring, pinky. Within a finger the
/// joints run from the knuckle outwards: MCP, PIP, DIP, TIP (for the thumb the
/// slots hold CMC, MCP, IP, TIP).
pub mod joint {
    pub const COUNT: usize = 21;
    pub const WRIST: usize = 0;
    pub const FINGERS: usize = 5;
    pub const PER_FINGER: usize = 4;

    pub const THUMB: usize = 0;
    pub const INDEX: usize = 1;
    pub const MIDDLE: usize = 2;
    pub const RING: usize = 3;
    pub const PINKY: usize = 4;

    /// Index of joint `k` (0 = MCP .. 3 = TIP) of finger `finger`.
    pub const fn of(finger: usize, k: usize) -> usize {
        1 + finger * PER_FINGER + k
    }

    pub const fn mcp(finger: usize) -> usize {
        of(finger, 0)
    }

    pub const fn tip(finger: usize) -> usize {
        of(finger, 3)
    }

    /// The middle-finger MCP anchors the stage-one crop.
    pub const MIDDLE_MCP: usize = mcp(MIDDLE);

    pub const NAMES: [&str; COUNT] = [
        "wrist", "thumb_cmc", "thumb_mcp", "thumb_ip", "thumb_tip", "index_mcp", "index_pip",
        "index_dip", "index_tip", "middle_mcp", "middle_pip", "middle_dip", "middle_tip",
        "ring_mcp", "ring_pip", "ring_dip", "ring_tip", "pinky_mcp", "pinky_pip", "pinky_dip",
        "pinky_tip",
    ];
}

/// Ordered 3D joint positions in millimeters, camera or canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    joints: Vec<Vector3<f64>>,
}

impl Pose {
    /// Accepts the 21-joint canonical layout or the 14-joint NYU subset.
    pub fn new(joints: Vec<Vector3<f64>>) -> Result<Self> {
        if joints.len() != 14 && joints.len() != joint::COUNT {
            return Err(Error::shape(format!(
                "pose must have 14 or 21 joints, got {}",
                joints.len()
            )));
        }
        if joints.iter().any(|j| !j.iter().all(|c| c.is_finite())) {
            return Err(Error::domain("pose coordinates must be finite"));
        }
        Ok(Self { joints })
    }

    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(3) {
            return Err(Error::shape(format!(
                "{} coordinates do not form 3D joints",
                coords.len()
            )));
        }
        Self::new(
            coords
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn joints(&self) -> &[Vector3<f64>] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|j| [j.x, j.y, j.z]).collect()
    }

    pub fn map(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Result<Self> {
        Self::new(self.joints.iter().map(f).collect())
    }
}
