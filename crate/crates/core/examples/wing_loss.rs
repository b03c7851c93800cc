//! Tabulates the Wing loss and its slope around the knee, then scores a pose
//! prediction that is off by a constant offset.
//!
//! `cargo run --example wing_loss`

use handforge::wing::{wing_loss, wing_loss_grad, WingConfig};
use nalgebra::Vector3;

fn main() -> handforge::Result<()> {
    let cfg = WingConfig::default();
    println!("w = {} mm, epsilon = {} mm, C = {:.4}", cfg.w, cfg.epsilon, cfg.c());
    println!("{:>8} {:>10} {:>8}", "|x| mm", "loss", "slope");
    for x in [0.5, 2.0, 7.5, 20.0, 50.0, 99.0, 100.0, 101.0, 150.0] {
        println!("{x:>8.1} {:>10.4} {:>8.4}", cfg.value(x), cfg.slope(x));
    }

    let gt: Vec<Vector3<f64>> = (0..21).map(|i| Vector3::new(i as f64 * 10.0, 0.0, 400.0)).collect();
    let pred: Vec<Vector3<f64>> = gt.iter().map(|p| p + Vector3::new(3.0, -4.0, 12.0)).collect();
    let loss = wing_loss(&pred, &gt, &cfg)?;
    let grad = wing_loss_grad(&pred, &gt, &cfg)?;
    println!("offset (3, -4, 12) mm: loss {loss:.4}, gradient of joint 0 {:.4?}", grad[0].as_slice());
    Ok(())
}
