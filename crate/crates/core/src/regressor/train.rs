use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamax::Adamax;
use super::network::{Regressor, Sample};
use crate::wing::WingConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// The rate is multiplied by `lr_gamma` every `lr_step_epochs` epochs; 0 disables the schedule.
    pub lr_step_epochs: usize,
    pub lr_gamma: f64,
    pub seed: u64,
    /// Wing loss in mm.
    pub wing: WingConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 0.001,
            epochs: 30,
            lr_step_epochs: 10,
            lr_gamma: 0.3,
            seed: 0,
            wing: WingConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Batch 128 and rate 0.0006, as used for full-scale training.
    pub fn full_scale() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 0.0006,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::domain(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return Err(Error::domain(format!("lr_gamma must lie in (0, 1], got {}", self.lr_gamma)));
        }
        self.wing.validate()
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn rate_at(&self, epoch: usize) -> f64 {
        if self.lr_step_epochs == 0 {
            return self.learning_rate;
        }
        self.learning_rate * self.lr_gamma.powi((epoch / self.lr_step_epochs) as i32)
    }
}

/// Mean per-sample training loss of one epoch (mm) and the rate it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Shuffled mini-batch Adamax training from `init`. The shuffle order
/// depends only on `cfg.seed` and the epoch.
pub fn train(init: Regressor, data: &[Sample], cfg: &TrainConfig) -> Result<(Regressor, Vec<EpochStats>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    let mut net = init;
    let n = net.params().len();
    let mut opt = Adamax::new(n);
    let mut grad = vec![0.0; n];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.rate_at(epoch);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let loss = net.loss_and_grad(&batch, &cfg.wing, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("loss diverged at epoch {}", epoch + 1)));
            }
            sum += loss * batch.len() as f64;
            if lr > 0.0 {
                opt.step(net.params_mut(), &grad, lr);
            }
        }
        trace.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: sum / data.len() as f64,
            lr,
        });
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("parameters became non-finite".into()));
    }
    Ok((net, trace))
}

/// Training that starts from `base` instead of a fresh initialization.
pub fn fine_tune(base: &Regressor, data: &[Sample], cfg: &TrainConfig) -> Result<(Regressor, Vec<EpochStats>)> {
    train(base.clone(), data, cfg)
}

/// Writes `epoch,mean_loss,lr` lines with a header.
pub fn write_trace(path: &Path, trace: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,mean_loss,lr\n");
    for s in trace {
        out.push_str(&format!("{},{},{}\n", s.epoch, s.mean_loss, s.lr));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
