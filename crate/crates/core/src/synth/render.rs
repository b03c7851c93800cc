//! Capsule rasterization with z-buffering.

use nalgebra::Vector3;

use super::skeleton::SkeletonTopology;
use crate::depth::{CameraIntrinsics, DepthImage};
use crate::{Error, Result};

const MAX_DEPTH: f64 = 65535.0;

/// A solid segment with hemispherical caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self::new(center, center, radius)
    }

    /// Smallest positive ray parameter `t` where `t * dir` enters the capsule.
    pub fn intersect(&self, dir: &Vector3<f64>) -> Option<f64> {
        let mut best = sphere_entry(dir, &self.a, self.radius);
        let axis = self.b - self.a;
        let len = axis.norm();
        if len > 1e-12 {
            best = min_opt(best, sphere_entry(dir, &self.b, self.radius));
            let n = axis / len;
            // lateral surface of the finite cylinder
            let d_perp = dir - n * dir.dot(&n);
            let w = -self.a;
            let w_perp = w - n * w.dot(&n);
            let a = d_perp.norm_squared();
            if a > 1e-18 {
                let half_b = d_perp.dot(&w_perp);
                let c = w_perp.norm_squared() - self.radius * self.radius;
                let disc = half_b * half_b - a * c;
                if disc >= 0.0 {
                    let t = (-half_b - disc.sqrt()) / a;
                    let s = (dir * t - self.a).dot(&n);
                    if t > 0.0 && (0.0..=len).contains(&s) {
                        best = min_opt(best, Some(t));
                    }
                }
            }
        }
        best
    }

    /// Conservative pixel rectangle `[u0, v0, u1, v1]` covering the capsule's
    /// projection, or `None` when part of it reaches behind the camera.
    fn screen_bounds(&self, k: &CameraIntrinsics) -> Option<[f64; 4]> {
        let r = self.radius;
        let mut bounds = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in [self.a, self.b] {
            if p.z - r <= 1e-9 {
                return None;
            }
            for z in [p.z - r, p.z + r] {
                for (x, y) in [(p.x - r, p.y - r), (p.x + r, p.y + r)] {
                    let u = k.fx * x / z + k.cx;
                    let v = k.fy * y / z + k.cy;
                    bounds[0] = bounds[0].min(u);
                    bounds[1] = bounds[1].min(v);
                    bounds[2] = bounds[2].max(u);
                    bounds[3] = bounds[3].max(v);
                }
            }
        }
        Some(bounds)
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn sphere_entry(dir: &Vector3<f64>, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let a = dir.norm_squared();
    let half_b = -dir.dot(center);
    let c = center.norm_squared() - radius * radius;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-half_b - disc.sqrt()) / a;
    (t > 0.0).then_some(t)
}

/// Z-buffers a set of capsules into a `width x height` depth image.
pub fn rasterize_capsules(
    capsules: &[Capsule],
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<DepthImage> {
    let mut zbuf = vec![f64::INFINITY; width * height];
    for cap in capsules.iter().filter(|c| c.radius > 0.0) {
        if cap.a.z <= 0.0 || cap.b.z <= 0.0 {
            return Err(Error::domain("capsule endpoint behind the camera"));
        }
        let (u0, v0, u1, v1) = match cap.screen_bounds(k) {
            Some([a, b, c, d]) => (a, b, c, d),
            None => (0.0, 0.0, width as f64, height as f64),
        };
        if u1 < 0.0 || v1 < 0.0 || u0 > width as f64 || v0 > height as f64 {
            continue;
        }
        let cu0 = u0.floor().max(0.0) as usize;
        let cv0 = v0.floor().max(0.0) as usize;
        let cu1 = (u1.ceil().max(0.0) as usize).min(width.saturating_sub(1));
        let cv1 = (v1.ceil().max(0.0) as usize).min(height.saturating_sub(1));
        for v in cv0..=cv1 {
            for u in cu0..=cu1 {
                if let Some(t) = cap.intersect(&k.ray(u as f64, v as f64)) {
                    let z = &mut zbuf[v * width + u];
                    if t < *z {
                        *z = t;
                    }
                }
            }
        }
    }
    let data = zbuf
        .into_iter()
        .map(|z| if z.is_finite() && z <= MAX_DEPTH { z } else { 0.0 })
        .collect();
    Ok(DepthImage::from_raw(width, height, data))
}

/// The capsules of a posed skeleton: one per bone, radius scaled by the thickness multipliers.
pub fn skeleton_capsules(
    joints: &[Vector3<f64>],
    topo: &SkeletonTopology,
    shape: &[f64],
) -> Result<Vec<Capsule>> {
    if joints.len() != topo.len() {
        return Err(Error::shape(format!(
            "{} joint positions for a {}-joint skeleton",
            joints.len(),
            topo.len()
        )));
    }
    if shape.len() < 10 {
        return Err(Error::shape("shape vector must have 10 entries"));
    }
    Ok(topo
        .bones()
        .map(|(p, c)| Capsule::new(joints[p], joints[c], topo.bone_radius(c, shape)))
        .collect())
}

/// Renders a camera-frame skeleton: each pixel holds the nearest capsule surface depth, or 0.
pub fn render_depth(
    joints: &[Vector3<f64>],
    topo: &SkeletonTopology,
    shape: &[f64],
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<DepthImage> {
    if let Some(j) = joints.iter().find(|j| !(j.z > 0.0)) {
        return Err(Error::domain(format!("joint at z = {} is behind the camera", j.z)));
    }
    let capsules = skeleton_capsules(joints, topo, shape)?;
    rasterize_capsules(&capsules, k, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::skeleton::JointSpec;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(475.0, 475.0, 160.0, 120.0).unwrap()
    }

    fn two_joint(radius: f64) -> SkeletonTopology {
        let j = |parent, radius| JointSpec {
            name: "j".into(),
            parent,
            offset: [0.0; 3],
            radius,
            finger: None,
            segment: None,
        };
        SkeletonTopology::new(vec![j(None, 0.0), j(Some(0), radius)]).unwrap()
    }

    #[test]
    fn degenerate_bone_renders_an_analytic_sphere() {
        let r = 12.5;
        let c = Vector3::new(0.0, 0.0, 500.0);
        let img = render_depth(&[c, c], &two_joint(r), &[1.0; 10], &k(), 320, 240).unwrap();
        assert!((img.get(160, 120) - (500.0 - r)).abs() < 1e-6);
        // pixels away from the silhouette stay empty
        assert_eq!(img.get(0, 0), 0.0);
        // the disk radius is about fx * r / z ≈ 11.9 px
        assert!(img.get(170, 120) > 0.0);
        assert_eq!(img.get(174, 120), 0.0);
    }

    #[test]
    fn off_center_sphere_matches_closed_form() {
        let center = Vector3::new(30.0, -20.0, 600.0);
        let r = 20.0;
        let img = rasterize_capsules(&[Capsule::sphere(center, r)], &k(), 320, 240).unwrap();
        for v in 90..120 {
            for u in 170..210 {
                let d = k().ray(u as f64, v as f64);
                // |t d - c|^2 = r^2
                let a = d.norm_squared();
                let b = d.dot(&center);
                let disc = b * b - a * (center.norm_squared() - r * r);
                let expected = if disc >= 0.0 { (b - disc.sqrt()) / a } else { 0.0 };
                assert!((img.get(u, v) - expected).abs() < 1e-9, "pixel ({u}, {v})");
            }
        }
    }

    #[test]
    fn empty_topology_renders_nothing() {
        let img = render_depth(&[], &SkeletonTopology::empty(), &[1.0; 10], &k(), 32, 24).unwrap();
        assert!(img.data().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn nearest_capsule_wins() {
        let near = Capsule::new(Vector3::new(-40.0, 0.0, 400.0), Vector3::new(40.0, 0.0, 400.0), 10.0);
        let far = Capsule::new(Vector3::new(-40.0, 0.0, 500.0), Vector3::new(40.0, 0.0, 500.0), 10.0);
        for order in [[near, far], [far, near]] {
            let img = rasterize_capsules(&order, &k(), 320, 240).unwrap();
            assert!((img.get(160, 120) - 390.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cylinder_side_depth() {
        // horizontal capsule along x at depth 500: the center column sees 500 - r
        let cap = Capsule::new(Vector3::new(-50.0, 0.0, 500.0), Vector3::new(50.0, 0.0, 500.0), 8.0);
        let img = rasterize_capsules(&[cap], &k(), 320, 240).unwrap();
        assert!((img.get(160, 120) - 492.0).abs() < 1e-9);
        // on the axis row, every pixel within the segment projection sees the cylinder
        let d = k().ray(180.0, 120.0);
        let t = img.get(180, 120);
        let p = d * t;
        assert!(((p.y).powi(2) + (p.z - 500.0).powi(2)).sqrt() - 8.0 < 1e-9);
    }

    #[test]
    fn joints_behind_camera_are_rejected() {
        let c = Vector3::new(0.0, 0.0, -5.0);
        assert!(matches!(
            render_depth(&[c, c], &two_joint(1.0), &[1.0; 10], &k(), 8, 8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bounds_are_conservative() {
        // brute force over the full image must agree with the bounded rasterization
        let caps = [
            Capsule::new(Vector3::new(-80.0, 30.0, 350.0), Vector3::new(60.0, -70.0, 520.0), 15.0),
            Capsule::new(Vector3::new(100.0, 90.0, 300.0), Vector3::new(100.0, 90.0, 300.0), 25.0),
        ];
        let k = CameraIntrinsics::new(200.0, 200.0, 80.0, 60.0).unwrap();
        let img = rasterize_capsules(&caps, &k, 160, 120).unwrap();
        for v in 0..120 {
            for u in 0..160 {
                let ray = k.ray(u as f64, v as f64);
                let brute = caps
                    .iter()
                    .filter_map(|c| c.intersect(&ray))
                    .fold(f64::INFINITY, f64::min);
                let brute = if brute.is_finite() { brute } else { 0.0 };
                assert_eq!(img.get(u, v), brute);
            }
        }
    }
}
