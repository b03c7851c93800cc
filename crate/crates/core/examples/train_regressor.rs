//! Trains the pose regressor on clean synthetic frames with Adamax and the
//! Wing loss, prints the loss trace and checks the checkpoint round trip.
//!
//! `cargo run --release --example train_regressor`

use std::sync::Arc;

use handforge::augment::{plan_frames, HintConfig, NoiseConfig, PlanSource, RenderSetup, Strategy};
use handforge::depth::CameraIntrinsics;
use handforge::bench::BenchConfig;
use handforge::pipeline::{init_network, stage1_samples};
use handforge::regressor::{decode_checkpoint, encode_checkpoint, train};
use handforge::synth::{generate_corpus, CorpusConfig, SceneConfig, SkeletonTopology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topo = SkeletonTopology::hand();
    let corpus = generate_corpus(500, &CorpusConfig::default(), &topo, 3, |_, _| false)?;
    let plans = plan_frames(Strategy::SD, &corpus, 500, &NoiseConfig::default(), None, 3)?;
    let k = CameraIntrinsics::new(237.5, 237.5, 80.0, 60.0)?;
    let source = PlanSource {
        plans: Arc::new(plans),
        setup: Arc::new(RenderSetup {
            topo,
            camera: k,
            width: 160,
            height: 120,
            scene: SceneConfig::default(),
            hint: HintConfig::default(),
        }),
        real: None,
    };

    // the desk benchmark network, trained for fewer epochs
    let mut cfg = BenchConfig::default().model;
    cfg.stage1.epochs = 30;
    cfg.stage1.lr_step_epochs = 15;

    let samples = stage1_samples(&source, &cfg.recipe, &k)?;
    let (net, trace) = train(init_network(&cfg, 1)?, &samples, &cfg.stage1)?;
    for e in trace.iter().step_by(5) {
        println!("epoch {:>2}  lr {:.5}  wing {:.3}", e.epoch, e.lr, e.mean_loss);
    }

    let restored = decode_checkpoint(&encode_checkpoint(&net)).map_err(|e| format!("checkpoint: {e}"))?;
    assert_eq!(restored, net);
    println!("network {:?}: checkpoint restores {} parameters exactly", net.sizes(), net.params().len());
    Ok(())
}
