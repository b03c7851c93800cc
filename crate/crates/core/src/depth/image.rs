use crate::{Error, Result};

/// Largest depth a 16-bit depth file can hold.
pub const MAX_DEPTH: f64 = 65535.0;

/// Row-major grid of depths in millimeters. `0` marks an invalid or background pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "depth buffer holds {} samples, expected {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|d| !(0.0..=MAX_DEPTH).contains(*d)) {
            return Err(Error::domain(format!("depth {bad} outside [0, {MAX_DEPTH}]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds an image from `f(u, v)`. Values are validated like [`DepthImage::new`].
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self::new(width, height, data)
    }

    /// Skips validation; callers guarantee every sample lies in `[0, MAX_DEPTH]`.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Depth at column `u`, row `v`. Panics when out of bounds.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        assert!(u < self.width && v < self.height, "pixel ({u}, {v}) out of bounds");
        self.data[v * self.width + u]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }

    /// Rounds every sample to whole millimeters, as a 16-bit sensor would report it.
    pub fn quantized(&self) -> Self {
        Self::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|d| d.round().min(MAX_DEPTH)).collect(),
        )
    }
}
