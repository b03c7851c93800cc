//! Builds a small dataset with all four strategies (real, synthetic, mixed,
//! noised), writes the images and a manifest, then reloads the manifest.
//!
//! `cargo run --example synth_dataset [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use handforge::augment::{
    build_dataset, plan_frames, DatasetManifest, HintConfig, NoiseConfig, RenderSetup, SimulatedCaptures, Strategy,
};
use handforge::depth::CameraIntrinsics;
use handforge::seed::derive_seed;
use handforge::synth::{generate_corpus, CorpusConfig, ParamStats, SceneConfig, SkeletonTopology};

fn main() -> handforge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_dataset_out".into()));
    let seed = 11;
    let topo = SkeletonTopology::hand();
    let corpus = Arc::new(generate_corpus(40, &CorpusConfig::default(), &topo, seed, |_, _| false)?);
    let stats = ParamStats::from_corpus(corpus.iter().map(|r| &r.params))?;
    let setup = Arc::new(RenderSetup {
        topo,
        camera: CameraIntrinsics::new(237.5, 237.5, 80.0, 60.0)?,
        width: 160,
        height: 120,
        scene: SceneConfig::default(),
        hint: HintConfig::default(),
    });
    // RD plans and the captures share a seed so MD backdrops match RD frames
    let capture_seed = derive_seed(seed, &[1]);
    let captures = SimulatedCaptures { corpus: corpus.clone(), setup: setup.clone(), seed: capture_seed };
    let noise = NoiseConfig::default();

    let mut entries = Vec::new();
    for s in Strategy::ALL {
        let plan_seed = if s == Strategy::RD { capture_seed } else { derive_seed(seed, &[2, s as u64]) };
        let plans = plan_frames(s, &corpus, 8, &noise, Some(&stats), plan_seed)?;
        let part = build_dataset(&plans, &setup, Some(&captures), &out, "train")?;
        println!("{s}: {} frames", part.entries.len());
        entries.extend(part.entries);
    }
    let manifest = DatasetManifest { entries, ..DatasetManifest::default() };
    let path = out.join("manifest.jsonl");
    manifest.save(&path)?;

    let reloaded = DatasetManifest::load(&path)?;
    reloaded.validate()?;
    assert_eq!(reloaded.entries, manifest.entries);
    println!("manifest round-trips: {} entries in {}", reloaded.entries.len(), path.display());
    Ok(())
}
