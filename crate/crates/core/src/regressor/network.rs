use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depth::Patch;
use crate::wing::{wing_loss_flat, WingConfig};
use crate::{Error, Result};

/// Input value of invalid patch samples.
pub const INVALID_INPUT: f64 = -1.0;

/// Fully connected ReLU network with an identity output layer.
///
/// Parameters live in one flat buffer: for each layer, the `out x in`
/// row-major weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// One training example: network input, normalized target and the metric
/// size of one normalized unit (half the crop cube, mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub unit: f64,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::shape(format!("layer sizes {sizes:?} need >= 2 non-zero entries")));
    }
    Ok(())
}

/// Nearest-neighbor downsampling of a patch to `res x res`, invalid samples
/// mapped to [`INVALID_INPUT`].
pub fn encode_patch(patch: &Patch, res: usize) -> Vec<f64> {
    let r = patch.resolution();
    let mut out = Vec::with_capacity(res * res);
    for row in 0..res {
        let sr = ((row as f64 + 0.5) * r as f64 / res as f64) as usize;
        for col in 0..res {
            let sc = ((col as f64 + 0.5) * r as f64 / res as f64) as usize;
            let v = patch.value(sr.min(r - 1), sc.min(r - 1));
            out.push(if Patch::is_valid(v) { v } else { INVALID_INPUT });
        }
    }
    out
}

impl Regressor {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        check_sizes(sizes)?;
        if params.len() != param_count(sizes) {
            return Err(Error::shape(format!(
                "{} parameters for layer sizes {sizes:?}, expected {}",
                params.len(),
                param_count(sizes)
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("network parameters must be finite"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Side of the square input image, if the input layer is square.
    pub fn input_res(&self) -> Option<usize> {
        let n = self.input_dim();
        let r = (n as f64).sqrt().round() as usize;
        (r * r == n).then_some(r)
    }

    /// Offsets of layer `l`'s weights and biases in the flat buffer.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start = param_count(&self.sizes[..=l]);
        (start, start + self.sizes[l] * self.sizes[l + 1])
    }

    fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w, _) = self.layer_offsets(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        ArrayView2::from_shape((o, i), &self.params[w..w + o * i]).unwrap()
    }

    fn biases(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b) = self.layer_offsets(l);
        ArrayView1::from(&self.params[b..b + self.sizes[l + 1]])
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Activations of every layer for a batch, input first.
    fn activations(&self, x: Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x];
        for l in 0..self.layers() {
            let mut z = acts[l].dot(&self.weights(l).t());
            z += &self.biases(l);
            if l + 1 < self.layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn batch_matrix<'a>(&self, inputs: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<Array2<f64>> {
        let n = inputs.len();
        let d = self.input_dim();
        let mut x = Array2::zeros((n, d));
        for (mut row, input) in x.axis_iter_mut(Axis(0)).zip(inputs) {
            if input.len() != d {
                return Err(Error::shape(format!("input of {} values, network expects {d}", input.len())));
            }
            row.assign(&ArrayView1::from(input));
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&[input])?.pop().unwrap())
    }

    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let x = self.batch_matrix(inputs.iter().copied())?;
        let out = self.activations(x).pop().unwrap();
        Ok(out.outer_iter().map(|r| r.to_vec()).collect())
    }

    /// Prediction for a patch, in the patch's normalized coordinates.
    pub fn forward_patch(&self, patch: &Patch) -> Result<Vec<f64>> {
        let res = self
            .input_res()
            .ok_or_else(|| Error::shape(format!("input layer of {} is not a square image", self.input_dim())))?;
        self.forward(&encode_patch(patch, res))
    }

    /// Mean Wing loss of a batch and its gradient with respect to every
    /// parameter, written to `grad`. Residuals are measured in mm
    /// (`unit` times the normalized residual) so the loss keeps metric units.
    pub fn loss_and_grad(&self, batch: &[&Sample], wing: &WingConfig, grad: &mut [f64]) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::shape("gradient buffer does not match the parameters"));
        }
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let out_dim = self.output_dim();
        let x = self.batch_matrix(batch.iter().map(|s| s.input.as_slice()))?;
        let acts = self.activations(x);
        let n = batch.len() as f64;

        let mut delta = Array2::zeros((batch.len(), out_dim));
        let mut total = 0.0;
        let mut pred_mm = vec![0.0; out_dim];
        let mut gt_mm = vec![0.0; out_dim];
        let mut g = vec![0.0; out_dim];
        let out = acts.last().unwrap();
        for (b, s) in batch.iter().enumerate() {
            if s.target.len() != out_dim {
                return Err(Error::shape(format!("target of {} values, network outputs {out_dim}", s.target.len())));
            }
            for j in 0..out_dim {
                pred_mm[j] = out[[b, j]] * s.unit;
                gt_mm[j] = s.target[j] * s.unit;
            }
            total += wing_loss_flat(&pred_mm, &gt_mm, wing, &mut g);
            for j in 0..out_dim {
                delta[[b, j]] = g[j] * s.unit / n;
            }
        }

        for l in (0..self.layers()).rev() {
            let (w_off, b_off) = self.layer_offsets(l);
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (wg, rest) = grad[w_off..].split_at_mut(o * i);
            let mut wg = ArrayViewMut2::from_shape((o, i), wg).unwrap();
            wg.assign(&delta.t().dot(&acts[l]));
            let mut bg = ArrayViewMut1::from(&mut rest[..o]);
            bg.assign(&delta.sum_axis(Axis(0)));
            debug_assert_eq!(b_off, w_off + o * i);
            if l > 0 {
                let mut prev = delta.dot(&self.weights(l));
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok(total / n)
    }

    /// Mean Wing loss of a batch without gradients.
    pub fn loss(&self, batch: &[&Sample], wing: &WingConfig) -> Result<f64> {
        let inputs: Vec<&[f64]> = batch.iter().map(|s| s.input.as_slice()).collect();
        let preds = self.forward_batch(&inputs)?;
        let mut g = vec![0.0; self.output_dim()];
        let mut total = 0.0;
        for (p, s) in preds.iter().zip(batch) {
            let pm: Vec<f64> = p.iter().map(|v| v * s.unit).collect();
            let gm: Vec<f64> = s.target.iter().map(|v| v * s.unit).collect();
            total += wing_loss_flat(&pm, &gm, wing, &mut g);
        }
        Ok(total / batch.len() as f64)
    }
}

/// Smallest `|z|` over the hidden pre-activations of a batch.
pub(crate) fn min_preactivation(net: &Regressor, batch: &[&Sample]) -> Result<f64> {
    let mut a = net.batch_matrix(batch.iter().map(|s| s.input.as_slice()))?;
    let mut min = f64::INFINITY;
    for l in 0..net.layers() - 1 {
        let mut z = a.dot(&net.weights(l).t());
        z += &net.biases(l);
        min = z.iter().fold(min, |m, v| m.min(v.abs()));
        z.mapv_inplace(|v| v.max(0.0));
        a = z;
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::{crop_patch, CameraIntrinsics, DepthImage};
    use nalgebra::Vector3;

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = Regressor::init(&[16, 8, 6], 3).unwrap();
        assert_eq!(a, Regressor::init(&[16, 8, 6], 3).unwrap());
        assert_ne!(a, Regressor::init(&[16, 8, 6], 4).unwrap());
        for l in 0..2 {
            assert!(a.biases(l).iter().all(|b| *b == 0.0));
        }
        assert_eq!(a.params().len(), 16 * 8 + 8 + 8 * 6 + 6);
    }

    #[test]
    fn init_weights_are_centered_and_bounded() {
        let r = Regressor::init(&[1024, 256, 3], 11).unwrap();
        let w = r.weights(0);
        let limit = (6.0f64 / 1280.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        let n = w.len() as f64;
        let mean = w.sum() / n;
        // uniform on [-a, a] has variance a^2 / 3
        let se = (limit * limit / 3.0 / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} vs standard error {se}");
    }

    #[test]
    fn zero_weights_output_the_bias() {
        let sizes = [4, 3, 2];
        let mut params = vec![0.0; param_count(&sizes)];
        let n = params.len();
        params[n - 2] = 0.25;
        params[n - 1] = -1.5;
        let r = Regressor::from_params(&sizes, params).unwrap();
        assert_eq!(r.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn hand_computed_forward_pass() {
        // 2 inputs -> 1 hidden unit -> 1 output
        // h = relu(0.5 * 2 - 1 * 3 + 4) = 2, y = -2 * h + 1 = -3
        let r = Regressor::from_params(&[2, 1, 1], vec![0.5, -1.0, 4.0, -2.0, 1.0]).unwrap();
        assert_eq!(r.forward(&[2.0, 3.0]).unwrap(), vec![-3.0]);
        // negative pre-activation is clipped: relu(0.5 * 2 - 1 * 9 + 4) = 0, y = 1
        assert_eq!(r.forward(&[2.0, 9.0]).unwrap(), vec![1.0]);
        assert!(r.forward(&[1.0]).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let r = Regressor::init(&[9, 5, 3], 1).unwrap();
        let x = [0.1, -0.2, 0.3, 0.4, -1.0, 0.0, 0.7, 0.2, -0.5];
        assert_eq!(r.forward(&x).unwrap(), r.forward(&x).unwrap());
        let batch = r.forward_batch(&[&x, &x]).unwrap();
        assert_eq!(batch[0], r.forward(&x).unwrap());
    }

    #[test]
    fn prediction_at_ground_truth_has_zero_gradient() {
        let sizes = [4, 3, 6];
        let mut params = vec![0.0; param_count(&sizes)];
        let target = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.6];
        let n = params.len();
        params[n - 6..].copy_from_slice(&target);
        let r = Regressor::from_params(&sizes, params).unwrap();
        let s = Sample { input: vec![0.3, -0.1, 0.9, 0.2], target, unit: 125.0 };
        let mut grad = vec![1.0; n];
        let loss = r.loss_and_grad(&[&s], &WingConfig::default(), &mut grad).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn duplicated_batch_scales_like_the_loss() {
        // summing the loss of two copies doubles every gradient entry of one copy
        let r = Regressor::init(&[4, 5, 3], 2).unwrap();
        let s = Sample { input: vec![0.3, -0.1, 0.9, 0.2], target: vec![0.4, -0.3, 0.2], unit: 100.0 };
        let n = r.params().len();
        let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
        let l1 = r.loss_and_grad(&[&s], &WingConfig::default(), &mut g1).unwrap();
        let l2 = r.loss_and_grad(&[&s, &s], &WingConfig::default(), &mut g2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let loss = r.loss(&[&s], &WingConfig::default()).unwrap();
        assert!((loss - l1).abs() < 1e-12);
    }

    #[test]
    fn patch_encoding_downsamples_and_marks_invalid() {
        let k = CameraIntrinsics::new(20.0, 20.0, 1.5, 1.5).unwrap();
        let img = DepthImage::new(4, 4, vec![
            500.0, 510.0, 0.0, 520.0,
            490.0, 500.0, 500.0, 500.0,
            500.0, 500.0, 900.0, 500.0,
            500.0, 500.0, 500.0, 480.0,
        ])
        .unwrap();
        let p = crop_patch(&img, &Vector3::new(0.0, 0.0, 500.0), 100.0, &k, 4).unwrap();
        assert_eq!(encode_patch(&p, 4), vec![
            0.0, 0.2, -1.0, 0.4,
            -0.2, 0.0, 0.0, 0.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, -0.4,
        ]);
        // 2x2 picks pixels (1, 1), (1, 3), (3, 1), (3, 3)
        assert_eq!(encode_patch(&p, 2), vec![0.0, 0.0, 0.0, -0.4]);
    }
}
