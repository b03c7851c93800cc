//! Desk-scale ablation benchmark.
//!
//! Generates a training corpus with held-out regions, simulated "real"
//! captures and their synthetic counterparts, a tagged test set of captures,
//! and trains the single-stage / two-stage, data-strategy and noise-subset
//! variants on it. All frames are rendered on demand from seeded plans.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{
    plan_frames, ConcatSource, FrameSource, HintConfig, NoiseConfig, PlanSource, RealFrames, RenderSetup,
    SimulatedCaptures, Strategy,
};
use crate::depth::{CameraIntrinsics, Pose};
use crate::eval::{axis_scores, tag_frames, AxisReport, SplitSpec};
use crate::pipeline::{
    infer_two_stage, init_network, predict, resolve_hint, stage1_patch, stage1_samples, train_stage2, TwoStageConfig,
    TwoStageModel,
};
use crate::regressor::{train, Regressor, Sample, TrainConfig};
use crate::seed::derive_seed;
use crate::synth::{generate_corpus, CorpusConfig, CorpusRecord, NoiseSubset, ParamStats, SceneConfig, SkeletonTopology};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub width: usize,
    pub height: usize,
    pub camera: CameraIntrinsics,
    /// Distinct hand configurations behind the training frames.
    pub corpus_size: usize,
    pub rd_count: usize,
    pub sd_count: usize,
    pub md_count: usize,
    pub nd_count: usize,
    pub test_count: usize,
    pub corpus: CorpusConfig,
    pub scene: SceneConfig,
    pub hint: HintConfig,
    pub noise_scale: f64,
    pub split: SplitSpec,
    pub model: TwoStageConfig,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut model = TwoStageConfig::default();
        model.recipe.patch_res = 64;
        model.recipe.input_res = 24;
        model.stage1 = TrainConfig { epochs: 100, learning_rate: 0.003, lr_step_epochs: 40, ..TrainConfig::default() };
        model.stage2 = TrainConfig { epochs: 20, learning_rate: 0.001, lr_step_epochs: 0, ..TrainConfig::default() };
        Self {
            width: 160,
            height: 120,
            camera: CameraIntrinsics { fx: 237.5, fy: 237.5, cx: 80.0, cy: 60.0 },
            corpus_size: 2000,
            rd_count: 2000,
            sd_count: 2000,
            md_count: 2000,
            nd_count: 2000,
            test_count: 500,
            corpus: CorpusConfig::default(),
            scene: SceneConfig::default(),
            // a coarse detector: the stage-one crop is often off-center
            hint: HintConfig { mcp_jitter: 25.0 },
            noise_scale: 0.1,
            split: SplitSpec::toy(),
            model,
            seed: 2019,
        }
    }
}

impl BenchConfig {
    /// A reduced configuration for smoke tests.
    pub fn tiny() -> Self {
        let mut cfg = Self {
            width: 80,
            height: 60,
            camera: CameraIntrinsics { fx: 118.75, fy: 118.75, cx: 40.0, cy: 30.0 },
            corpus_size: 24,
            rd_count: 24,
            sd_count: 24,
            md_count: 24,
            nd_count: 24,
            test_count: 16,
            ..Self::default()
        };
        cfg.model.recipe.patch_res = 16;
        cfg.model.recipe.input_res = 8;
        cfg.model.hidden = vec![16];
        cfg.model.stage1.epochs = 2;
        cfg.model.stage2.epochs = 1;
        cfg
    }
}

/// A block of training frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataPart {
    Strategy(Strategy),
    /// ND frames restricted to one noise subset.
    Noised(NoiseSubset),
}

impl DataPart {
    pub const RD: DataPart = DataPart::Strategy(Strategy::RD);
    pub const SD: DataPart = DataPart::Strategy(Strategy::SD);
    pub const MD: DataPart = DataPart::Strategy(Strategy::MD);
    pub const ND: DataPart = DataPart::Strategy(Strategy::ND);

    pub fn name(self) -> String {
        match self {
            DataPart::Strategy(s) => s.tag().to_string(),
            DataPart::Noised(n) => format!("ND[{}]", n.name()),
        }
    }
}

pub fn parts_name(parts: &[DataPart]) -> String {
    parts.iter().map(|p| p.name()).collect::<Vec<_>>().join("+")
}

/// Frames of a generated benchmark, rendered on demand.
pub struct Benchmark {
    pub cfg: BenchConfig,
    pub setup: Arc<RenderSetup>,
    pub train_corpus: Arc<Vec<CorpusRecord>>,
    pub test_corpus: Arc<Vec<CorpusRecord>>,
    stats: ParamStats,
    real: Arc<dyn RealFrames>,
    test: PlanSource,
    stage1_cache: BTreeMap<DataPart, Arc<Vec<Sample>>>,
}

impl Benchmark {
    pub fn new(cfg: BenchConfig) -> Result<Self> {
        cfg.split.validate()?;
        cfg.camera.validate()?;
        let topo = SkeletonTopology::hand();
        let split = cfg.split.clone();
        // held-out subjects cannot be redrawn, so their entries are dropped instead
        let kept = (0..cfg.corpus.subjects).filter(|&s| !split.in_shape_region(Some(s))).count();
        if kept == 0 {
            return Err(Error::domain("every corpus subject is held out"));
        }
        let drawn = cfg.corpus_size.div_ceil(kept) * cfg.corpus.subjects as usize;
        let mut train_corpus = generate_corpus(drawn, &cfg.corpus, &topo, derive_seed(cfg.seed, &[1]), |p, _| {
            split.in_viewpoint_region(p) || split.in_articulation_region(p)
        })?;
        train_corpus.retain(|r| !split.in_shape_region(r.subject));
        train_corpus.truncate(cfg.corpus_size);
        let test_corpus = generate_corpus(cfg.test_count, &cfg.corpus, &topo, derive_seed(cfg.seed, &[2]), |_, _| false)?;
        let stats = ParamStats::from_corpus(train_corpus.iter().map(|r| &r.params))?;
        let setup = Arc::new(RenderSetup {
            topo,
            camera: cfg.camera,
            width: cfg.width,
            height: cfg.height,
            scene: cfg.scene.clone(),
            hint: cfg.hint,
        });
        let train_corpus = Arc::new(train_corpus);
        let test_corpus = Arc::new(test_corpus);
        let real: Arc<dyn RealFrames> = Arc::new(SimulatedCaptures {
            corpus: train_corpus.clone(),
            setup: setup.clone(),
            seed: derive_seed(cfg.seed, &[3]),
        });
        let test_plans = plan_frames(Strategy::RD, &test_corpus, cfg.test_count, &NoiseConfig::default(), None, derive_seed(cfg.seed, &[4]))?;
        let test = PlanSource { plans: Arc::new(test_plans), setup: setup.clone(), real: None };
        Ok(Self { cfg, setup, train_corpus, test_corpus, stats, real, test, stage1_cache: BTreeMap::new() })
    }

    /// Training frames of one block.
    pub fn source(&self, part: DataPart) -> Result<PlanSource> {
        let cfg = &self.cfg;
        let (strategy, count, noise, stream) = match part {
            DataPart::Strategy(Strategy::RD) => (Strategy::RD, cfg.rd_count, NoiseConfig::default(), 3),
            DataPart::Strategy(Strategy::SD) => (Strategy::SD, cfg.sd_count, NoiseConfig::default(), 5),
            DataPart::Strategy(Strategy::MD) => (Strategy::MD, cfg.md_count, NoiseConfig::default(), 6),
            DataPart::Strategy(Strategy::ND) => {
                (Strategy::ND, cfg.nd_count, NoiseConfig { scale: cfg.noise_scale, ..NoiseConfig::default() }, 7)
            }
            DataPart::Noised(subset) => (
                Strategy::ND,
                cfg.nd_count,
                NoiseConfig { scale: cfg.noise_scale, subsets: vec![subset] },
                8 + subset as u64,
            ),
        };
        // RD plans share the capture seeds of the simulated real frames MD pairs with
        let plans = plan_frames(strategy, &self.train_corpus, count, &noise, Some(&self.stats), derive_seed(cfg.seed, &[stream]))?;
        Ok(PlanSource { plans: Arc::new(plans), setup: self.setup.clone(), real: Some(self.real.clone()) })
    }

    pub fn sources(&self, parts: &[DataPart]) -> Result<ConcatSource> {
        let mut all = ConcatSource::default();
        for &p in parts {
            all.push(Arc::new(self.source(p)?));
        }
        Ok(all)
    }

    pub fn test_source(&self) -> &PlanSource {
        &self.test
    }

    fn stage1_part(&mut self, part: DataPart) -> Result<Arc<Vec<Sample>>> {
        if let Some(s) = self.stage1_cache.get(&part) {
            return Ok(s.clone());
        }
        let src = self.source(part)?;
        let samples = Arc::new(stage1_samples(&src, &self.cfg.model.recipe, &self.cfg.camera)?);
        self.stage1_cache.insert(part, samples.clone());
        Ok(samples)
    }

    /// Trains a single-stage network on the union of `parts`.
    pub fn train_single(&mut self, parts: &[DataPart]) -> Result<Regressor> {
        let mut data = Vec::new();
        for &p in parts {
            data.extend(self.stage1_part(p)?.iter().cloned());
        }
        let cfg = &self.cfg.model;
        Ok(train(init_network(cfg, 1)?, &data, &cfg.stage1)?.0)
    }

    /// Adds a second stage trained on `parts` to `net1`.
    pub fn train_second(&self, net1: &Regressor, parts: &[DataPart], fine_tune: bool) -> Result<TwoStageModel> {
        let cfg = TwoStageConfig { fine_tune, ..self.cfg.model.clone() };
        let src = self.sources(parts)?;
        let (net2, _) = train_stage2(net1, &src, &cfg, &self.cfg.camera)?;
        Ok(TwoStageModel { net1: net1.clone(), net2: Some(net2), recipe: cfg.recipe, refine: cfg.refine })
    }

    /// Axis report of a model on the test captures.
    pub fn evaluate(&self, model: &TwoStageModel) -> Result<AxisReport> {
        let k = &self.cfg.camera;
        let results: Vec<(Pose, Pose)> = (0..self.test.len())
            .into_par_iter()
            .map(|i| {
                let f = self.test.frame(i)?;
                let hint = f.hint.ok_or_else(|| Error::domain("test frame without hint"))?;
                let pred = match model.net2 {
                    Some(_) => infer_two_stage(model, &f.image, &hint, k)?.pose,
                    None => {
                        let c = resolve_hint(&f.image, &hint, k)?;
                        predict(&model.net1, &stage1_patch(&f.image, &c, &model.recipe, k)?)?
                    }
                };
                Ok((pred, f.pose))
            })
            .collect::<Result<_>>()?;
        let (preds, gts): (Vec<Pose>, Vec<Pose>) = results.into_iter().unzip();
        let params: Vec<_> = self.test_corpus.iter().map(|r| r.params.clone()).collect();
        let subjects: Vec<_> = self.test_corpus.iter().map(|r| r.subject).collect();
        let tags = tag_frames(&params, &subjects, &self.cfg.split)?;
        axis_scores(&preds, &gts, &tags)
    }

    fn single(&self, net: &Regressor) -> TwoStageModel {
        TwoStageModel { net1: net.clone(), net2: None, recipe: self.cfg.model.recipe, refine: self.cfg.model.refine }
    }
}

/// Named test reports of every ablation arm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AblationResults {
    pub reports: BTreeMap<String, AxisReport>,
    pub seconds: f64,
}

impl AblationResults {
    /// Overall test error (mm) of arm `name`.
    pub fn error(&self, name: &str) -> Option<f64> {
        self.reports.get(name).and_then(|r| r.overall)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<28} {:>9} {:>9} {:>9}\n", "arm", "overall", "interp", "extrap");
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |e| format!("{e:.2}"));
        for (name, r) in &self.reports {
            out.push_str(&format!("{name:<28} {:>9} {:>9} {:>9}\n", f(r.overall), f(r.interpolation), f(r.extrapolation)));
        }
        out
    }
}

pub mod arm {
    pub const SS_RD: &str = "SS RD";
    pub const SS_FULL: &str = "SS RD+SD+MD+ND";
    pub const TS_RD: &str = "TS RD";
    pub const TS_FULL: &str = "TS RD+SD+MD+ND";
    pub const TS_RD_FRESH: &str = "TS RD (no fine-tune)";
    pub const SS_RSM: &str = "SS RD+SD+MD";
    pub const SS_RSM_ALL: &str = "SS RD+SD+MD+ND[all]";
    pub const SS_RSM_CAMERA: &str = "SS RD+SD+MD+ND[camera]";
    pub const SS_RSM_ARTICULATION: &str = "SS RD+SD+MD+ND[articulation]";
    pub const SS_RSM_SHAPE: &str = "SS RD+SD+MD+ND[shape]";
}

/// Trains and evaluates every arm. `log` receives one line per finished arm.
pub fn run_ablation(cfg: BenchConfig, log: &mut dyn FnMut(&str)) -> Result<AblationResults> {
    use DataPart as D;
    let start = Instant::now();
    let mut bench = Benchmark::new(cfg)?;
    let mut results = AblationResults::default();
    let mut record = |results: &mut AblationResults, name: &str, report: AxisReport| {
        log(&format!("{name:<28} {:>8.2} mm  ({:.0} s)", report.overall.unwrap_or(f64::NAN), start.elapsed().as_secs_f64()));
        results.reports.insert(name.to_string(), report);
    };

    let rd = [D::RD];
    let full = [D::RD, D::SD, D::MD, D::ND];
    // the second network sees real and clean synthetic frames only
    let stage2_full = [D::RD, D::SD];

    let ss_rd = bench.train_single(&rd)?;
    record(&mut results, arm::SS_RD, bench.evaluate(&bench.single(&ss_rd))?);
    let ts_rd = bench.train_second(&ss_rd, &rd, true)?;
    record(&mut results, arm::TS_RD, bench.evaluate(&ts_rd)?);
    let ts_rd_fresh = bench.train_second(&ss_rd, &rd, false)?;
    record(&mut results, arm::TS_RD_FRESH, bench.evaluate(&ts_rd_fresh)?);

    let ss_full = bench.train_single(&full)?;
    record(&mut results, arm::SS_FULL, bench.evaluate(&bench.single(&ss_full))?);
    let ts_full = bench.train_second(&ss_full, &stage2_full, true)?;
    record(&mut results, arm::TS_FULL, bench.evaluate(&ts_full)?);
    bench.stage1_cache.remove(&D::ND);

    let rsm = [D::RD, D::SD, D::MD];
    let ss = bench.train_single(&rsm)?;
    record(&mut results, arm::SS_RSM, bench.evaluate(&bench.single(&ss))?);
    for (name, subset) in [
        (arm::SS_RSM_ALL, NoiseSubset::All),
        (arm::SS_RSM_CAMERA, NoiseSubset::Camera),
        (arm::SS_RSM_ARTICULATION, NoiseSubset::Articulation),
        (arm::SS_RSM_SHAPE, NoiseSubset::Shape),
    ] {
        let ss = bench.train_single(&[D::RD, D::SD, D::MD, D::Noised(subset)])?;
        bench.stage1_cache.remove(&D::Noised(subset));
        record(&mut results, name, bench.evaluate(&bench.single(&ss))?);
    }
    results.seconds = start.elapsed().as_secs_f64();
    Ok(results)
}
