//! Trains a single-stage model on real frames and reports its error on the
//! five extrapolation and interpolation axes of a held-out test set.
//!
//! `cargo run --release --example evaluate_axes`

use handforge::bench::{BenchConfig, Benchmark, DataPart};
use handforge::pipeline::TwoStageModel;

fn main() -> handforge::Result<()> {
    let cfg = BenchConfig { rd_count: 500, test_count: 200, ..BenchConfig::default() };
    let mut bench = Benchmark::new(cfg)?;
    let net1 = bench.train_single(&[DataPart::RD])?;
    let cfg = &bench.cfg.model;
    let model = TwoStageModel { net1, net2: None, recipe: cfg.recipe, refine: cfg.refine };
    let report = bench.evaluate(&model)?;
    print!("{}", report.to_table());
    Ok(())
}
