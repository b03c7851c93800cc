//! Wing loss: logarithmic for small residuals, linear for large ones.
//!
//! For a joint residual `v = p - q` with norm `x`:
//!
//! ```text
//! f(x) = w * ln(1 + x / epsilon)   if x < w
//!        x - C                     otherwise,   C = w - w * ln(1 + w / epsilon)
//! ```
//!
//! The loss of a pose is the mean of `f` over its joints. `C` makes the two
//! branches meet at `x = w`; the slope there jumps from `w / (epsilon + w)` to 1.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingConfig {
    /// Half-width of the logarithmic region, in residual units.
    pub w: f64,
    /// Curvature limit of the logarithmic region, in residual units.
    pub epsilon: f64,
}

impl Default for WingConfig {
    /// `w = 100 mm`, `epsilon = 7.5 mm`.
    fn default() -> Self {
        Self {
            w: 100.0,
            epsilon: 7.5,
        }
    }
}

impl WingConfig {
    pub fn new(w: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { w, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.epsilon > 0.0) || !self.w.is_finite() || !self.epsilon.is_finite() {
            return Err(Error::domain(format!(
                "wing loss needs w > 0 and epsilon > 0, got w={} epsilon={}",
                self.w, self.epsilon
            )));
        }
        Ok(())
    }

    /// The same loss expressed in units `unit` times larger (both knee and curvature rescale).
    pub fn rescaled(&self, unit: f64) -> Self {
        Self {
            w: self.w / unit,
            epsilon: self.epsilon / unit,
        }
    }

    /// The constant joining the two branches.
    pub fn c(&self) -> f64 {
        self.w - self.w * (self.w / self.epsilon).ln_1p()
    }

    /// Per-joint loss for a residual of norm `x`.
    pub fn value(&self, x: f64) -> f64 {
        if x < self.w {
            self.w * (x / self.epsilon).ln_1p()
        } else {
            x - self.c()
        }
    }

    /// Derivative of [`WingConfig::value`] with respect to `x`.
    pub fn slope(&self, x: f64) -> f64 {
        if x < self.w {
            self.w / (self.epsilon + x)
        } else {
            1.0
        }
    }
}

fn check(pred: &[Vector3<f64>], gt: &[Vector3<f64>], cfg: &WingConfig) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "{} predicted joints vs {} ground-truth joints",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::shape("wing loss of an empty pose"));
    }
    cfg.validate()
}

/// Mean per-joint Wing loss.
pub fn wing_loss(pred: &[Vector3<f64>], gt: &[Vector3<f64>], cfg: &WingConfig) -> Result<f64> {
    check(pred, gt, cfg)?;
    let sum: f64 = pred.iter().zip(gt).map(|(p, q)| cfg.value((p - q).norm())).sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`wing_loss`] with respect to every predicted coordinate.
/// A joint with zero residual contributes a zero gradient.
pub fn wing_loss_grad(
    pred: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    cfg: &WingConfig,
) -> Result<Vec<Vector3<f64>>> {
    check(pred, gt, cfg)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, q)| {
            let v = p - q;
            let x = v.norm();
            if x == 0.0 {
                Vector3::zeros()
            } else {
                v * (cfg.slope(x) / (x * n))
            }
        })
        .collect())
}

/// Loss and gradient over flat `[x0, y0, z0, x1, ...]` buffers, writing the
/// gradient into `grad`. Used on network outputs without building poses.
pub fn wing_loss_flat(pred: &[f64], gt: &[f64], cfg: &WingConfig, grad: &mut [f64]) -> f64 {
    debug_assert!(pred.len() == gt.len() && pred.len() == grad.len() && pred.len().is_multiple_of(3));
    let n = (pred.len() / 3) as f64;
    let mut loss = 0.0;
    for ((p, q), g) in pred
        .chunks_exact(3)
        .zip(gt.chunks_exact(3))
        .zip(grad.chunks_exact_mut(3))
    {
        let v = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        let x = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        loss += cfg.value(x);
        let s = if x == 0.0 { 0.0 } else { cfg.slope(x) / (x * n) };
        for c in 0..3 {
            g[c] = v[c] * s;
        }
    }
    loss / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(x: f64) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        (vec![Vector3::new(x, 0.0, 0.0)], vec![Vector3::zeros()])
    }

    #[test]
    fn zero_residual_gives_zero_loss_and_gradient() {
        let p = vec![Vector3::new(1.0, 2.0, 3.0); 21];
        let cfg = WingConfig::default();
        assert_eq!(wing_loss(&p, &p, &cfg).unwrap(), 0.0);
        assert!(wing_loss_grad(&p, &p, &cfg).unwrap().iter().all(|g| *g == Vector3::zeros()));
    }

    #[test]
    fn knee_value_and_continuity() {
        let cfg = WingConfig::default();
        let (p, q) = single(100.0);
        let expected = 100.0 * (1.0f64 + 100.0 / 7.5).ln();
        let knee = wing_loss(&p, &q, &cfg).unwrap();
        assert!((knee - expected).abs() < 1e-12);
        // log branch evaluated at the knee agrees with the linear branch
        let log_branch = cfg.w * (1.0 + cfg.w / cfg.epsilon).ln();
        assert!((log_branch - (cfg.w - cfg.c())).abs() < 1e-12);
        let below = cfg.value(100.0 - 1e-9);
        assert!((below - knee).abs() < 1e-8);
    }

    #[test]
    fn linear_branch_example() {
        let cfg = WingConfig::default();
        let (p, q) = single(200.0);
        let c = 100.0 - 100.0 * (1.0f64 + 100.0 / 7.5).ln();
        let loss = wing_loss(&p, &q, &cfg).unwrap();
        assert!((loss - (200.0 - c)).abs() < 1e-12);
        assert!(loss > cfg.value(100.0));
    }

    #[test]
    fn linear_branch_gradient_has_norm_one_over_n() {
        let cfg = WingConfig::default();
        let gt = vec![Vector3::zeros(); 21];
        let pred: Vec<_> = (0..21)
            .map(|i| Vector3::new(150.0 + i as f64, -80.0, 40.0 * (i as f64).cos()))
            .collect();
        for g in wing_loss_grad(&pred, &gt, &cfg).unwrap() {
            assert!((g.norm() - 1.0 / 21.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_joint_counts_are_rejected() {
        let cfg = WingConfig::default();
        let a = vec![Vector3::zeros(); 21];
        let b = vec![Vector3::zeros(); 14];
        assert!(matches!(wing_loss(&a, &b, &cfg), Err(Error::Shape(_))));
        assert!(matches!(wing_loss_grad(&a, &b, &cfg), Err(Error::Shape(_))));
        assert!(WingConfig::new(0.0, 1.0).is_err());
        assert!(WingConfig::new(1.0, -1.0).is_err());
    }

    #[test]
    fn flat_and_vector_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = WingConfig::default();
        let pred: Vec<_> = (0..21).map(|_| Vector3::from_fn(|_, _| rng.random_range(-150.0..150.0))).collect();
        let gt: Vec<_> = (0..21).map(|_| Vector3::from_fn(|_, _| rng.random_range(-150.0..150.0))).collect();
        let flat = |v: &[Vector3<f64>]| v.iter().flat_map(|j| [j.x, j.y, j.z]).collect::<Vec<_>>();
        let mut grad = vec![0.0; 63];
        let loss = wing_loss_flat(&flat(&pred), &flat(&gt), &cfg, &mut grad);
        assert_eq!(loss, wing_loss(&pred, &gt, &cfg).unwrap());
        assert_eq!(grad, flat(&wing_loss_grad(&pred, &gt, &cfg).unwrap()));
    }

    #[test]
    fn rescaling_preserves_shape() {
        let cfg = WingConfig::default();
        let unit = 125.0;
        let scaled = cfg.rescaled(unit);
        for x in [0.0, 3.0, 50.0, 99.0, 100.0, 180.0] {
            assert!((scaled.value(x / unit) * unit - cfg.value(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = WingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let h = 1e-4;
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.random_range(1..=21);
            let pred: Vec<Vector3<f64>> = (0..n).map(|_| Vector3::from_fn(|_, _| rng.random_range(-250.0..250.0))).collect();
            let gt: Vec<Vector3<f64>> = (0..n).map(|_| Vector3::from_fn(|_, _| rng.random_range(-250.0..250.0))).collect();
            // the slope jumps at the knee and the direction is undefined at zero
            let near_kink = pred.iter().zip(&gt).any(|(p, q)| {
                let x = (p - q).norm();
                x < 1e-2 || (x - cfg.w).abs() < 1e-2
            });
            if near_kink {
                continue;
            }
            let grad = wing_loss_grad(&pred, &gt, &cfg).unwrap();
            // relative error of the whole gradient vector
            let (mut diff, mut scale) = (0.0f64, 0.0f64);
            for j in 0..n {
                for c in 0..3 {
                    let mut plus = pred.clone();
                    let mut minus = pred.clone();
                    plus[j][c] += h;
                    minus[j][c] -= h;
                    let fd = (wing_loss(&plus, &gt, &cfg).unwrap() - wing_loss(&minus, &gt, &cfg).unwrap()) / (2.0 * h);
                    diff += (fd - grad[j][c]).powi(2);
                    scale += fd.powi(2).max(grad[j][c].powi(2));
                }
            }
            let rel = (diff / scale).sqrt();
            assert!(rel <= 1e-5, "relative gradient error {rel}");
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative_and_monotone(a in 0.0..500.0f64, b in 0.0..500.0f64) {
            let cfg = WingConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cfg.value(lo) >= 0.0);
            prop_assert!(cfg.value(lo) <= cfg.value(hi));
        }
    }
}
