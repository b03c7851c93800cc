//! Trains a small two-stage model and runs it on held-out frames, comparing
//! the stage-one estimate with the refined one.
//!
//! `cargo run --release --example two_stage_inference`

use handforge::augment::FrameSource;
use handforge::bench::{BenchConfig, Benchmark, DataPart};
use handforge::eval::mean_joint_error;
use handforge::pipeline::infer_two_stage;

fn main() -> handforge::Result<()> {
    let cfg = BenchConfig { rd_count: 500, test_count: 100, ..BenchConfig::default() };
    let mut bench = Benchmark::new(cfg)?;
    let net1 = bench.train_single(&[DataPart::RD])?;
    let model = bench.train_second(&net1, &[DataPart::RD], true)?;

    let test = bench.test_source();
    let (mut first, mut second, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    let mut refined = 0;
    for i in 0..test.len() {
        let frame = test.frame(i)?;
        let hint = frame.hint.expect("generated frames carry a hint");
        let out = infer_two_stage(&model, &frame.image, &hint, &bench.cfg.camera)?;
        refined += usize::from(out.refined);
        first.push(out.pose1);
        second.push(out.pose);
        truth.push(frame.pose);
    }
    println!("{} test frames, {refined} refined", truth.len());
    println!("stage one: {:.2} mm", mean_joint_error(&first, &truth)?);
    println!("stage two: {:.2} mm", mean_joint_error(&second, &truth)?);
    Ok(())
}
