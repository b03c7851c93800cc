use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics. Pixel `(u, v)` has its center at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::domain(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::domain("principal point must be finite"));
        }
        Ok(())
    }

    /// Direction of the ray through pixel `(u, v)`, scaled so that its z component is 1.
    /// A point `t * ray` on the ray therefore sits at depth `t`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Projects a camera-frame point (mm) to `(u, v, z)`.
pub fn project(point: &Vector3<f64>, k: &CameraIntrinsics) -> Result<(f64, f64, f64)> {
    let z = point.z;
    if !(z > 0.0) {
        return Err(Error::domain(format!("cannot project point with z = {z}")));
    }
    Ok((k.fx * point.x / z + k.cx, k.fy * point.y / z + k.cy, z))
}

/// Lifts pixel `(u, v)` at depth `z` back to a camera-frame point.
pub fn backproject(u: f64, v: f64, z: f64, k: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("cannot backproject depth {z}")));
    }
    Ok(Vector3::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z))
}
