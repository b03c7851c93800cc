//! Runs the desk-scale ablation and prints one row per arm.
//!
//! `cargo run --release --example ablation [tiny]`

use handforge::bench::{run_ablation, BenchConfig};

fn main() -> handforge::Result<()> {
    let cfg = match std::env::args().nth(1).as_deref() {
        Some("tiny") => BenchConfig::tiny(),
        _ => BenchConfig::default(),
    };
    let results = run_ablation(cfg, &mut |line| eprintln!("{line}"))?;
    print!("{}", results.to_table());
    println!("total {:.0} s", results.seconds);
    Ok(())
}
