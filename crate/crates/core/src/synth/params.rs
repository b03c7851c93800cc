use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CAMERA_DIMS: usize = 8;
pub const ARTICULATION_DIMS: usize = 45;
pub const SHAPE_DIMS: usize = 10;
pub const PARAM_DIMS: usize = CAMERA_DIMS + ARTICULATION_DIMS + SHAPE_DIMS;

/// Open interval shape multipliers must stay in.
pub const SHAPE_RANGE: (f64, f64) = (0.5, 2.0);
const SHAPE_CLAMP_MARGIN: f64 = 1e-3;
const MIN_CAM_SCALE: f64 = 1e-3;

/// Hand model parameters: 8-d camera, 45-d articulation, 10-d shape.
///
/// * camera: `cam_scale`, `cam_translation` (mm) and `cam_rotation`, a unit
///   quaternion stored as `[w, x, y, z]`;
/// * articulation: three axis-angle components (radians) for each of the 15
///   finger segments, ordered finger-major (thumb..pinky) then MCP, PIP, DIP;
/// * shape: five per-finger bone-length multipliers followed by five per-finger
///   thickness multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandParams {
    pub cam_scale: f64,
    pub cam_translation: [f64; 3],
    pub cam_rotation: [f64; 4],
    pub articulation: Vec<f64>,
    pub shape: [f64; SHAPE_DIMS],
}

/// Camera part of [`HandParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    pub scale: f64,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

impl CameraParams {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// The rotation as a unit quaternion; fails unless `|q| = 1` within 1e-6.
    pub fn unit_rotation(&self) -> Result<UnitQuaternion<f64>> {
        let [w, x, y, z] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "camera rotation quaternion has norm {}",
                q.norm()
            )));
        }
        Ok(UnitQuaternion::new_unchecked(q))
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }
}

impl HandParams {
    /// Identity camera, flat hand, unit shape.
    pub fn neutral() -> Self {
        Self {
            cam_scale: 1.0,
            cam_translation: [0.0; 3],
            cam_rotation: [1.0, 0.0, 0.0, 0.0],
            articulation: vec![0.0; ARTICULATION_DIMS],
            shape: [1.0; SHAPE_DIMS],
        }
    }

    pub fn camera(&self) -> CameraParams {
        CameraParams {
            scale: self.cam_scale,
            translation: self.cam_translation,
            rotation: self.cam_rotation,
        }
    }

    pub fn length_scale(&self, finger: usize) -> f64 {
        self.shape[finger]
    }

    pub fn thickness_scale(&self, finger: usize) -> f64 {
        self.shape[5 + finger]
    }

    pub fn validate(&self) -> Result<()> {
        if self.articulation.len() != ARTICULATION_DIMS {
            return Err(Error::shape(format!(
                "articulation has {} components, expected {ARTICULATION_DIMS}",
                self.articulation.len()
            )));
        }
        if !self.to_vector().iter().all(|v| v.is_finite()) {
            return Err(Error::domain("hand parameters must be finite"));
        }
        if !(self.cam_scale > 0.0) {
            return Err(Error::domain(format!(
                "camera scale must be positive, got {}",
                self.cam_scale
            )));
        }
        self.camera().unit_rotation()?;
        if let Some(s) = self
            .shape
            .iter()
            .find(|s| !(**s > SHAPE_RANGE.0 && **s < SHAPE_RANGE.1))
        {
            return Err(Error::domain(format!(
                "shape multiplier {s} outside ({}, {})",
                SHAPE_RANGE.0, SHAPE_RANGE.1
            )));
        }
        if let Some(a) = self.articulation.iter().find(|a| a.abs() > PI) {
            return Err(Error::domain(format!("articulation angle {a} outside [-pi, pi]")));
        }
        Ok(())
    }

    /// Flattens to `[scale, t(3), q(4), articulation(45), shape(10)]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_DIMS);
        v.push(self.cam_scale);
        v.extend_from_slice(&self.cam_translation);
        v.extend_from_slice(&self.cam_rotation);
        v.extend_from_slice(&self.articulation);
        v.extend_from_slice(&self.shape);
        v
    }

    /// Inverse of [`HandParams::to_vector`]; performs no validation.
    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if v.len() != PARAM_DIMS {
            return Err(Error::shape(format!(
                "parameter vector has {} dims, expected {PARAM_DIMS}",
                v.len()
            )));
        }
        let mut shape = [0.0; SHAPE_DIMS];
        shape.copy_from_slice(&v[CAMERA_DIMS + ARTICULATION_DIMS..]);
        Ok(Self {
            cam_scale: v[0],
            cam_translation: [v[1], v[2], v[3]],
            cam_rotation: [v[4], v[5], v[6], v[7]],
            articulation: v[CAMERA_DIMS..CAMERA_DIMS + ARTICULATION_DIMS].to_vec(),
            shape,
        })
    }
}

/// Which parameter group a noise draw perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSubset {
    Camera,
    Articulation,
    Shape,
    All,
}

impl NoiseSubset {
    pub const ALL_SUBSETS: [NoiseSubset; 4] = [
        NoiseSubset::Camera,
        NoiseSubset::Articulation,
        NoiseSubset::Shape,
        NoiseSubset::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseSubset::Camera => "camera",
            NoiseSubset::Articulation => "articulation",
            NoiseSubset::Shape => "shape",
            NoiseSubset::All => "all",
        }
    }

    fn covers(self, dim: usize) -> bool {
        match self {
            NoiseSubset::Camera => dim < CAMERA_DIMS,
            NoiseSubset::Articulation => (CAMERA_DIMS..CAMERA_DIMS + ARTICULATION_DIMS).contains(&dim),
            NoiseSubset::Shape => dim >= CAMERA_DIMS + ARTICULATION_DIMS,
            NoiseSubset::All => true,
        }
    }
}

/// Per-dimension mean and standard deviation over a parameter corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ParamStats {
    /// Sample statistics (`n - 1` denominator). Needs at least two entries.
    pub fn from_corpus<'a>(corpus: impl IntoIterator<Item = &'a HandParams>) -> Result<Self> {
        let vectors: Vec<Vec<f64>> = corpus.into_iter().map(HandParams::to_vector).collect();
        if vectors.len() < 2 {
            return Err(Error::domain(format!(
                "parameter statistics need at least 2 corpus entries, got {}",
                vectors.len()
            )));
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; PARAM_DIMS];
        for v in &vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; PARAM_DIMS];
        for v in &vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        Ok(Self { mean, std })
    }
}

/// Adds independent Gaussian noise `N(0, (noise_scale * std_d)^2)` to every
/// dimension `d` in `subset`, then renormalizes the quaternion and clamps the
/// result back into the parameter invariants. Deterministic in `seed`.
pub fn sample_noised_params(
    base: &HandParams,
    stats: &ParamStats,
    subset: NoiseSubset,
    noise_scale: f64,
    seed: u64,
) -> Result<HandParams> {
    if !(noise_scale >= 0.0) {
        return Err(Error::domain(format!("noise scale must be >= 0, got {noise_scale}")));
    }
    if stats.std.len() != PARAM_DIMS || stats.mean.len() != PARAM_DIMS {
        return Err(Error::shape("parameter statistics have the wrong dimension"));
    }
    if noise_scale == 0.0 {
        return Ok(base.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = base.to_vector();
    for (d, x) in v.iter_mut().enumerate() {
        if subset.covers(d) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += z * noise_scale * stats.std[d];
        }
    }
    let mut out = HandParams::from_vector(&v)?;
    if subset.covers(0) {
        out.cam_scale = out.cam_scale.max(MIN_CAM_SCALE);
        let [w, x, y, z] = out.cam_rotation;
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        out.cam_rotation = if n > 1e-12 {
            [w / n, x / n, y / n, z / n]
        } else {
            base.cam_rotation
        };
    }
    for a in &mut out.articulation {
        *a = a.clamp(-PI, PI);
    }
    for s in &mut out.shape {
        *s = s.clamp(SHAPE_RANGE.0 + SHAPE_CLAMP_MARGIN, SHAPE_RANGE.1 - SHAPE_CLAMP_MARGIN);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<HandParams> {
        (0..20)
            .map(|i| {
                let mut p = HandParams::neutral();
                let t = i as f64;
                p.cam_scale = 1.0 + 0.01 * t;
                p.cam_translation = [t, -2.0 * t, 500.0 + 3.0 * t];
                let half = 0.02 * t;
                p.cam_rotation = [half.cos(), 0.0, 0.0, half.sin()];
                for (j, a) in p.articulation.iter_mut().enumerate() {
                    *a = 0.01 * ((j as f64) + t).sin();
                }
                for (j, s) in p.shape.iter_mut().enumerate() {
                    *s = 1.0 + 0.01 * ((j as f64) * t).cos();
                }
                p
            })
            .collect()
    }

    #[test]
    fn vector_layout_is_8_45_10() {
        let p = corpus()[3].clone();
        let v = p.to_vector();
        assert_eq!(v.len(), 63);
        assert_eq!(v[0], p.cam_scale);
        assert_eq!(&v[4..8], &p.cam_rotation);
        assert_eq!(&v[53..], &p.shape);
        assert_eq!(HandParams::from_vector(&v).unwrap(), p);
    }

    #[test]
    fn validation_catches_invariant_violations() {
        assert!(HandParams::neutral().validate().is_ok());
        let mut p = HandParams::neutral();
        p.cam_rotation = [1.0, 0.1, 0.0, 0.0];
        assert!(p.validate().is_err());
        let mut p = HandParams::neutral();
        p.shape[2] = 2.0;
        assert!(p.validate().is_err());
        let mut p = HandParams::neutral();
        p.articulation[7] = 3.5;
        assert!(p.validate().is_err());
        let mut p = HandParams::neutral();
        p.cam_scale = 0.0;
        assert!(p.validate().is_err());
        let mut p = HandParams::neutral();
        p.articulation.pop();
        assert!(matches!(p.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn stats_need_two_entries() {
        assert!(ParamStats::from_corpus(&[]).is_err());
        assert!(ParamStats::from_corpus(&corpus()[..1]).is_err());
        let stats = ParamStats::from_corpus(&corpus()[..2]).unwrap();
        assert_eq!(stats.std.len(), 63);
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = corpus();
        let stats = ParamStats::from_corpus(&c).unwrap();
        for subset in NoiseSubset::ALL_SUBSETS {
            assert_eq!(sample_noised_params(&c[5], &stats, subset, 0.0, 9).unwrap(), c[5]);
        }
    }

    #[test]
    fn subset_isolation() {
        let c = corpus();
        let stats = ParamStats::from_corpus(&c).unwrap();
        let base = &c[7];
        let shape_only = sample_noised_params(base, &stats, NoiseSubset::Shape, 1.0, 3).unwrap();
        assert_eq!(shape_only.camera(), base.camera());
        assert_eq!(shape_only.articulation, base.articulation);
        assert_ne!(shape_only.shape, base.shape);

        let cam_only = sample_noised_params(base, &stats, NoiseSubset::Camera, 1.0, 3).unwrap();
        assert_eq!(cam_only.articulation, base.articulation);
        assert_eq!(cam_only.shape, base.shape);
        assert!(cam_only.camera().unit_rotation().is_ok());

        let art_only = sample_noised_params(base, &stats, NoiseSubset::Articulation, 1.0, 3).unwrap();
        assert_eq!(art_only.camera(), base.camera());
        assert_eq!(art_only.shape, base.shape);
    }

    #[test]
    fn sampling_is_seeded() {
        let c = corpus();
        let stats = ParamStats::from_corpus(&c).unwrap();
        let a = sample_noised_params(&c[1], &stats, NoiseSubset::All, 0.5, 11).unwrap();
        let b = sample_noised_params(&c[1], &stats, NoiseSubset::All, 0.5, 11).unwrap();
        let d = sample_noised_params(&c[1], &stats, NoiseSubset::All, 0.5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        a.validate().unwrap();
    }

    #[test]
    fn large_noise_is_clamped_into_invariants() {
        let c = corpus();
        let mut stats = ParamStats::from_corpus(&c).unwrap();
        stats.std.iter_mut().for_each(|s| *s = 10.0);
        for seed in 0..50 {
            let p = sample_noised_params(&c[0], &stats, NoiseSubset::All, 1.0, seed).unwrap();
            p.validate().unwrap();
        }
    }

    #[test]
    fn noise_std_matches_corpus_std() {
        // translation x is never clamped, so its spread is exactly the requested one
        let c = corpus();
        let stats = ParamStats::from_corpus(&c).unwrap();
        let sigma = stats.std[1];
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|seed| {
                sample_noised_params(&c[0], &stats, NoiseSubset::Camera, 1.0, seed as u64)
                    .unwrap()
                    .cam_translation[0]
                    - c[0].cam_translation[0]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let rel = (var.sqrt() - sigma).abs() / sigma;
        assert!(rel < 0.02, "sample std off by {rel}");
    }
}
