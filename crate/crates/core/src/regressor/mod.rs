//! A small fully connected pose regressor, its Adamax optimizer and the
//! training loops.
//!
//! The network maps a downsampled, depth-normalized patch to `3 x 21` joint
//! coordinates in the patch's normalized frame. Training minimizes the Wing
//! loss of the metric residual.

mod adamax;
mod checkpoint;
mod network;
mod train;

pub use adamax::Adamax;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use network::{encode_patch, Regressor, Sample, INVALID_INPUT};
pub use train::{fine_tune, train, write_trace, EpochStats, TrainConfig};

/// Checks the analytic gradient of a network against central differences.
/// Returns the relative error `||fd - g|| / max(||fd||, ||g||)` over all
/// parameters, or `None` when a ReLU sits within `margin` of its kink for
/// some sample (finite differences are meaningless there).
pub fn gradient_check(
    net: &Regressor,
    batch: &[&Sample],
    wing: &crate::wing::WingConfig,
    h: f64,
    margin: f64,
) -> crate::Result<Option<f64>> {
    if network::min_preactivation(net, batch)? < margin {
        return Ok(None);
    }
    let mut grad = vec![0.0; net.params().len()];
    net.loss_and_grad(batch, wing, &mut grad)?;
    let mut probe = net.clone();
    let (mut diff, mut fd_norm, mut g_norm) = (0.0, 0.0, 0.0);
    for (i, &g) in grad.iter().enumerate() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = probe.loss(batch, wing)?;
        probe.params_mut()[i] = orig - h;
        let down = probe.loss(batch, wing)?;
        probe.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        diff += (fd - g).powi(2);
        fd_norm += fd * fd;
        g_norm += g * g;
    }
    let scale = f64::max(fd_norm, g_norm).sqrt();
    Ok(Some(if scale == 0.0 { 0.0 } else { diff.sqrt() / scale }))
}
