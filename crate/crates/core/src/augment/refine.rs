use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::depth::{backproject, crop_patch, CameraIntrinsics, DepthImage, Patch, Pose};
use crate::{Error, Result};

/// Axis-aligned 3D box given by closed intervals in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl CropBox {
    pub fn new(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Result<Self> {
        for (name, [lo, hi]) in [("x", x), ("y", y), ("z", z)] {
            if !(lo <= hi) {
                return Err(Error::domain(format!("empty {name} interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { x, y, z })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (self.x[0]..=self.x[1]).contains(&p.x)
            && (self.y[0]..=self.y[1]).contains(&p.y)
            && (self.z[0]..=self.z[1]).contains(&p.z)
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.x[0] + self.x[1]),
            0.5 * (self.y[0] + self.y[1]),
            0.5 * (self.z[0] + self.z[1]),
        )
    }

    pub fn extents(&self) -> Vector3<f64> {
        Vector3::new(self.x[1] - self.x[0], self.y[1] - self.y[0], self.z[1] - self.z[0])
    }

    pub fn max_extent(&self) -> f64 {
        self.extents().max()
    }
}

/// Margins added around a pose's bounding box before re-cropping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub x_offset: f64,
    pub y_offset: f64,
    pub z_offset: f64,
    /// Extra margin on the camera side only; skin lies in front of the skeleton.
    pub z_thickness: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            x_offset: 30.0,
            y_offset: 30.0,
            z_offset: 30.0,
            z_thickness: 20.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.x_offset, self.y_offset, self.z_offset, self.z_thickness];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("refine offsets must be >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Tight bounding box of the joints.
pub fn pose_bbox(joints: &[Vector3<f64>]) -> Result<CropBox> {
    let first = joints.first().ok_or_else(|| Error::domain("bounding box of an empty pose"))?;
    let (mut lo, mut hi) = (*first, *first);
    for j in &joints[1..] {
        lo = lo.inf(j);
        hi = hi.sup(j);
    }
    CropBox::new([lo.x, hi.x], [lo.y, hi.y], [lo.z, hi.z])
}

/// `[x_min - x_off, x_max + x_off] x [y_min - y_off, y_max + y_off] x
/// [z_min - z_off - z_thickness, z_max + z_off]`.
pub fn expand_bbox(b: &CropBox, cfg: &RefineConfig) -> CropBox {
    CropBox {
        x: [b.x[0] - cfg.x_offset, b.x[1] + cfg.x_offset],
        y: [b.y[0] - cfg.y_offset, b.y[1] + cfg.y_offset],
        z: [b.z[0] - cfg.z_offset - cfg.z_thickness, b.z[1] + cfg.z_offset],
    }
}

/// Zeroes every pixel whose back-projected point falls outside `region`.
pub fn filter_to_box(img: &DepthImage, region: &CropBox, k: &CameraIntrinsics) -> DepthImage {
    let w = img.width();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d <= 0.0 {
                return 0.0;
            }
            let p = backproject((i % w) as f64, (i / w) as f64, d, k).expect("positive depth");
            if region.contains(&p) {
                d
            } else {
                0.0
            }
        })
        .collect();
    DepthImage::from_raw(w, img.height(), data)
}

/// Stage-two patch: keeps only pixels inside the expanded bounding box of
/// `pose1`, then crops around the box center with a cube as large as the
/// box's longest side.
pub fn refine_patch(
    img: &DepthImage,
    pose1: &Pose,
    cfg: &RefineConfig,
    k: &CameraIntrinsics,
    out_res: usize,
) -> Result<Patch> {
    cfg.validate()?;
    let region = expand_bbox(&pose_bbox(pose1.joints())?, cfg);
    let filtered = filter_to_box(img, &region, k);
    if filtered.valid_count() == 0 {
        return Err(Error::EmptyPatch("no pixel inside the refined box".into()));
    }
    let center = region.center();
    if !(center.z > 0.0) {
        return Err(Error::EmptyPatch("refined box lies behind the camera".into()));
    }
    let cube = region.max_extent().max(1.0);
    let patch = crop_patch(&filtered, &center, cube, k, out_res)?;
    if patch.valid_count() == 0 {
        return Err(Error::EmptyPatch("refined crop holds no valid pixel".into()));
    }
    Ok(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_joint_box_is_degenerate() {
        let p = Vector3::new(3.0, -4.0, 500.0);
        let b = pose_bbox(&[p]).unwrap();
        assert_eq!(b, CropBox { x: [3.0, 3.0], y: [-4.0, -4.0], z: [500.0, 500.0] });
        assert!(pose_bbox(&[]).is_err());
    }

    #[test]
    fn two_joint_box() {
        let b = pose_bbox(&[Vector3::new(0.0, 0.0, 400.0), Vector3::new(50.0, -20.0, 450.0)]).unwrap();
        assert_eq!(b, CropBox { x: [0.0, 50.0], y: [-20.0, 0.0], z: [400.0, 450.0] });
    }

    #[test]
    fn random_pose_box_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let joints: Vec<Vector3<f64>> = (0..21)
                .map(|_| Vector3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(300.0..700.0)))
                .collect();
            let b = pose_bbox(&joints).unwrap();
            let mut scan = [[f64::MAX, f64::MIN]; 3];
            for j in &joints {
                for a in 0..3 {
                    scan[a][0] = scan[a][0].min(j[a]);
                    scan[a][1] = scan[a][1].max(j[a]);
                }
            }
            assert_eq!([b.x, b.y, b.z], scan);
        }
    }

    #[test]
    fn expansion_examples() {
        let cfg = RefineConfig::default();
        let b = CropBox::new([0.0, 50.0], [-20.0, 0.0], [400.0, 450.0]).unwrap();
        let e = expand_bbox(&b, &cfg);
        assert_eq!(e.z, [350.0, 480.0]);
        assert_eq!(e.x, [-30.0, 80.0]);
        assert_eq!(e.y, [-50.0, 30.0]);
        let zero = RefineConfig { x_offset: 0.0, y_offset: 0.0, z_offset: 0.0, z_thickness: 0.0 };
        assert_eq!(expand_bbox(&b, &zero), b);
    }

    #[test]
    fn invalid_boxes_and_configs() {
        assert!(CropBox::new([1.0, 0.0], [0.0, 0.0], [0.0, 0.0]).is_err());
        let bad = RefineConfig { x_offset: -1.0, ..RefineConfig::default() };
        assert!(bad.validate().is_err());
    }

    fn oracle_keeps(u: usize, v: usize, d: f64, b: &CropBox, k: &CameraIntrinsics) -> bool {
        let x = (u as f64 - k.cx) * d / k.fx;
        let y = (v as f64 - k.cy) * d / k.fy;
        d > 0.0
            && b.x[0] <= x && x <= b.x[1]
            && b.y[0] <= y && y <= b.y[1]
            && b.z[0] <= d && d <= b.z[1]
    }

    #[test]
    fn filtering_matches_per_pixel_oracle() {
        let k = CameraIntrinsics::new(60.0, 60.0, 31.5, 31.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let img = DepthImage::from_fn(64, 64, |_, _| {
                if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random_range(300.0..700.0f64).round() }
            })
            .unwrap();
            let lo = Vector3::new(rng.random_range(-150.0..0.0), rng.random_range(-150.0..0.0), rng.random_range(350.0..500.0));
            let ext = Vector3::new(rng.random_range(0.0..150.0), rng.random_range(0.0..150.0), rng.random_range(0.0..150.0));
            let b = CropBox::new([lo.x, lo.x + ext.x], [lo.y, lo.y + ext.y], [lo.z, lo.z + ext.z]).unwrap();
            let out = filter_to_box(&img, &b, &k);
            for v in 0..64 {
                for u in 0..64 {
                    let d = img.get(u, v);
                    let want = if oracle_keeps(u, v, d, &b, &k) { d } else { 0.0 };
                    assert_eq!(out.get(u, v), want, "pixel ({u}, {v})");
                }
            }
        }
    }

    #[test]
    fn refinement_without_removal_equals_plain_crop() {
        let k = CameraIntrinsics::new(100.0, 100.0, 3.5, 3.5).unwrap();
        let img = DepthImage::from_fn(8, 8, |u, v| 480.0 + (u + v) as f64).unwrap();
        let mut joints = vec![Vector3::new(-50.0, -50.0, 450.0); 20];
        joints.push(Vector3::new(50.0, 50.0, 520.0));
        let pose = Pose::new(joints).unwrap();
        let cfg = RefineConfig::default();
        let region = expand_bbox(&pose_bbox(pose.joints()).unwrap(), &cfg);
        assert_eq!(filter_to_box(&img, &region, &k), img);
        let refined = refine_patch(&img, &pose, &cfg, &k, 16).unwrap();
        let plain = crop_patch(&img, &region.center(), region.max_extent(), &k, 16).unwrap();
        assert_eq!(refined, plain);
    }

    #[test]
    fn background_plane_behind_box_is_removed() {
        use crate::synth::{render_hand, HandParams, SkeletonTopology};
        let k = CameraIntrinsics::new(118.75, 118.75, 40.0, 30.0).unwrap();
        let topo = SkeletonTopology::hand();
        let mut params = HandParams::neutral();
        params.cam_translation = [0.0, 0.0, 500.0];
        let (hand, pose) = render_hand(&params, &topo, &k, 80, 60).unwrap();
        let cfg = RefineConfig::default();
        let region = expand_bbox(&pose_bbox(pose.joints()).unwrap(), &cfg);
        let wall = region.z[1] + 300.0;
        let scene = DepthImage::from_fn(80, 60, |u, v| {
            let d = hand.get(u, v);
            if d > 0.0 { d } else { wall }
        })
        .unwrap();
        let filtered = filter_to_box(&scene, &region, &k);
        assert!(filtered.data().iter().all(|&d| d < wall));
        assert_eq!(filtered.valid_count(), filter_to_box(&hand, &region, &k).valid_count());
        let patch = refine_patch(&scene, &pose, &cfg, &k, 32).unwrap();
        let far = patch.center().z + patch.half_cube();
        assert!(patch.values().iter().all(|&x| !Patch::is_valid(x) || patch.denormalize_depth(x) < far));
    }

    #[test]
    fn arm_pixels_are_cut_and_joints_stay_inside() {
        use crate::synth::{render_hand, rasterize_capsules, skeleton_capsules, Capsule, HandParams, SkeletonTopology};
        let k = CameraIntrinsics::new(118.75, 118.75, 40.0, 30.0).unwrap();
        let topo = SkeletonTopology::hand();
        let mut params = HandParams::neutral();
        params.cam_translation = [0.0, 0.0, 500.0];
        let (_, pose) = render_hand(&params, &topo, &k, 80, 60).unwrap();
        let cfg = RefineConfig::default();
        let region = expand_bbox(&pose_bbox(pose.joints()).unwrap(), &cfg);
        let mut capsules = skeleton_capsules(pose.joints(), &topo, &params.shape).unwrap();
        // an arm running from the wrist out past x_max + x_offset
        let wrist = pose.joints()[crate::depth::joint::WRIST];
        let elbow = Vector3::new(region.x[1] + 200.0, wrist.y, wrist.z);
        capsules.push(Capsule::new(wrist, elbow, 25.0));
        let img = rasterize_capsules(&capsules, &k, 80, 60).unwrap();
        let out = filter_to_box(&img, &region, &k);
        let mut removed = 0;
        for v in 0..60 {
            for u in 0..80 {
                let d = img.get(u, v);
                let keep = oracle_keeps(u, v, d, &region, &k);
                assert_eq!(out.get(u, v), if keep { d } else { 0.0 });
                if d > 0.0 && !keep {
                    removed += 1;
                }
            }
        }
        assert!(removed > 0);
        assert!(pose.joints().iter().all(|j| region.contains(j)));
    }

    proptest! {
        #[test]
        fn expansion_is_monotone(
            lo in prop::array::uniform3(-200.0..200.0f64),
            ext in prop::array::uniform3(0.0..200.0f64),
            a in prop::array::uniform4(0.0..60.0f64),
            extra in prop::array::uniform4(0.0..60.0f64),
        ) {
            let b = CropBox::new([lo[0], lo[0] + ext[0]], [lo[1], lo[1] + ext[1]], [lo[2], lo[2] + ext[2]]).unwrap();
            let small = RefineConfig { x_offset: a[0], y_offset: a[1], z_offset: a[2], z_thickness: a[3] };
            let large = RefineConfig {
                x_offset: a[0] + extra[0], y_offset: a[1] + extra[1],
                z_offset: a[2] + extra[2], z_thickness: a[3] + extra[3],
            };
            let (s, l) = (expand_bbox(&b, &small), expand_bbox(&b, &large));
            for (si, li) in [(s.x, l.x), (s.y, l.y), (s.z, l.z)] {
                prop_assert!(li[0] <= si[0] && li[1] >= si[1]);
            }
        }
    }
}
