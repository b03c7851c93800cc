use nalgebra::Vector3;

use super::{project, CameraIntrinsics, DepthImage};
use crate::{Error, Result};

/// Side of the metric crop cube used when no other size is configured (mm).
pub const DEFAULT_CUBE_SIZE: f64 = 250.0;

/// A square, depth-normalized crop of a depth image.
///
/// Valid samples hold `(depth - center.z) / (cube_size / 2)` and therefore lie in
/// `[-1, 1]`. Pixels that were background, out of the image, or outside the
/// depth slab of the cube hold [`Patch::INVALID`].
///
/// Joint coordinates use the same metric normalization on all three axes, so
/// [`Patch::normalize_point`] and [`Patch::denormalize_point`] are exact inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    resolution: usize,
    values: Vec<f64>,
    center: Vector3<f64>,
    cube_size: f64,
    intrinsics: CameraIntrinsics,
    /// Image-space window `[u0, v0, u1, v1]` the patch was resampled from.
    window: [f64; 4],
}

impl Patch {
    pub const INVALID: f64 = f64::NEG_INFINITY;

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major normalized samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn is_valid(value: f64) -> bool {
        value != Self::INVALID
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| Self::is_valid(**v)).count()
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn cube_size(&self) -> f64 {
        self.cube_size
    }

    pub fn half_cube(&self) -> f64 {
        self.cube_size / 2.0
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn window(&self) -> [f64; 4] {
        self.window
    }

    /// Continuous image coordinates sampled by patch pixel `(row, col)`.
    pub fn sample_coords(&self, row: usize, col: usize) -> (f64, f64) {
        let [u0, v0, u1, v1] = self.window;
        let r = self.resolution as f64;
        (
            u0 + (col as f64 + 0.5) * (u1 - u0) / r,
            v0 + (row as f64 + 0.5) * (v1 - v0) / r,
        )
    }

    /// Nearest source pixel for patch pixel `(row, col)`; may lie outside the image.
    pub fn source_pixel(&self, row: usize, col: usize) -> (i64, i64) {
        let (u, v) = self.sample_coords(row, col);
        (u.round() as i64, v.round() as i64)
    }

    pub fn normalize_depth(&self, depth: f64) -> f64 {
        (depth - self.center.z) / self.half_cube()
    }

    pub fn denormalize_depth(&self, value: f64) -> f64 {
        self.center.z + value * self.half_cube()
    }

    pub fn normalize_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.center) / self.half_cube()
    }

    pub fn denormalize_point(&self, n: &Vector3<f64>) -> Vector3<f64> {
        self.center + n * self.half_cube()
    }

    /// Metric depth view of the patch: valid samples in mm, invalid samples as 0.
    pub fn to_depth_image(&self) -> DepthImage {
        let data = self
            .values
            .iter()
            .map(|&v| {
                if Self::is_valid(v) {
                    self.denormalize_depth(v).clamp(0.0, 65535.0)
                } else {
                    0.0
                }
            })
            .collect();
        DepthImage::from_raw(self.resolution, self.resolution, data)
    }
}

/// Crops the image region subtended by an axis-aligned cube of side `cube_size`
/// centered at `center` and resamples it to `out_res x out_res` with nearest-neighbor.
///
/// The window is the projection of the cube's x/y extent at the center depth.
/// Depths outside `[center.z - cube_size/2, center.z + cube_size/2]` and zero
/// depths become [`Patch::INVALID`].
pub fn crop_patch(
    img: &DepthImage,
    center: &Vector3<f64>,
    cube_size: f64,
    k: &CameraIntrinsics,
    out_res: usize,
) -> Result<Patch> {
    if !(cube_size > 0.0) || !cube_size.is_finite() {
        return Err(Error::domain(format!("cube size must be positive, got {cube_size}")));
    }
    if out_res == 0 {
        return Err(Error::domain("output resolution must be positive"));
    }
    let half = cube_size / 2.0;
    let (u0, v0, _) = project(&Vector3::new(center.x - half, center.y - half, center.z), k)?;
    let (u1, v1, _) = project(&Vector3::new(center.x + half, center.y + half, center.z), k)?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if u1 < -0.5 || v1 < -0.5 || u0 > w - 0.5 || v0 > h - 0.5 {
        return Err(Error::EmptyPatch(format!(
            "cube at ({:.1}, {:.1}, {:.1}) projects outside the {}x{} image",
            center.x,
            center.y,
            center.z,
            img.width(),
            img.height()
        )));
    }

    let mut patch = Patch {
        resolution: out_res,
        values: Vec::with_capacity(out_res * out_res),
        center: *center,
        cube_size,
        intrinsics: *k,
        window: [u0, v0, u1, v1],
    };
    let (near, far) = (center.z - half, center.z + half);
    for row in 0..out_res {
        for col in 0..out_res {
            let (pu, pv) = patch.source_pixel(row, col);
            let inside = pu >= 0 && pv >= 0 && (pu as usize) < img.width() && (pv as usize) < img.height();
            let value = if inside {
                let d = img.get(pu as usize, pv as usize);
                if d > 0.0 && d >= near && d <= far {
                    ((d - center.z) / half).clamp(-1.0, 1.0)
                } else {
                    Patch::INVALID
                }
            } else {
                Patch::INVALID
            };
            patch.values.push(value);
        }
    }
    Ok(patch)
}
