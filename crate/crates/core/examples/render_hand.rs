//! Draws one hand from the parameter corpus, renders it clean and as a
//! simulated capture, and writes both as 16-bit PGM files.
//!
//! `cargo run --example render_hand [out_dir]`

use std::path::PathBuf;

use handforge::depth::{joint, project, write_pgm, CameraIntrinsics};
use handforge::synth::{generate_corpus, render_capture, render_hand, CorpusConfig, SceneConfig, SkeletonTopology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_hand_out".into()));
    std::fs::create_dir_all(&out)?;

    let topo = SkeletonTopology::hand();
    let k = CameraIntrinsics::new(237.5, 237.5, 80.0, 60.0)?;
    let corpus = generate_corpus(1, &CorpusConfig::default(), &topo, 7, |_, _| false)?;
    let params = &corpus[0].params;

    let (clean, pose) = render_hand(params, &topo, &k, 160, 120)?;
    let (capture, _) = render_capture(params, &topo, &k, 160, 120, &SceneConfig::default(), 7)?;
    write_pgm(&clean.quantized(), &out.join("clean.pgm"))?;
    write_pgm(&capture, &out.join("capture.pgm"))?;

    println!("clean: {} of {} pixels on the hand", clean.valid_count(), clean.data().len());
    println!("capture: {} valid pixels", capture.valid_count());
    for (name, j) in joint::NAMES.iter().zip(pose.joints()) {
        let (u, v, z) = project(j, &k)?;
        println!("{name:<12} u {u:6.1} v {v:6.1} z {z:6.1} mm");
    }
    println!("wrote {}", out.display());
    Ok(())
}
