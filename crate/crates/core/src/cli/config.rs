//! Run configuration: one JSON document, resolved over a named preset.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augment::{HintConfig, NoiseConfig, Strategy};
use crate::bench::BenchConfig;
use crate::depth::CameraIntrinsics;
use crate::eval::{digest, SplitSpec};
use crate::pipeline::TwoStageConfig;
use crate::regressor::TrainConfig;
use crate::seed::derive_seed;
use crate::synth::{CorpusConfig, SceneConfig};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small images and networks that train in minutes on a laptop.
    #[default]
    Desk,
    /// Full-resolution patches with batch 128 and rate 0.0006.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Single,
    #[default]
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyCounts {
    #[serde(rename = "RD")]
    pub rd: usize,
    #[serde(rename = "SD")]
    pub sd: usize,
    #[serde(rename = "MD")]
    pub md: usize,
    #[serde(rename = "ND")]
    pub nd: usize,
}

impl Default for StrategyCounts {
    fn default() -> Self {
        Self { rd: 2000, sd: 2000, md: 2000, nd: 2000 }
    }
}

impl StrategyCounts {
    pub fn get(&self, s: Strategy) -> usize {
        match s {
            Strategy::RD => self.rd,
            Strategy::SD => self.sd,
            Strategy::MD => self.md,
            Strategy::ND => self.nd,
        }
    }
}

/// Strategies each stage trains on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSelection {
    pub stage1: Vec<Strategy>,
    pub stage2: Vec<Strategy>,
}

impl Default for DataSelection {
    fn default() -> Self {
        Self { stage1: Strategy::ALL.to_vec(), stage2: vec![Strategy::RD, Strategy::SD] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// Master seed. Corpus, rendering, initialization and shuffling seeds derive from it.
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub camera: CameraIntrinsics,
    pub corpus_size: usize,
    pub corpus: CorpusConfig,
    pub scene: SceneConfig,
    pub hint: HintConfig,
    pub counts: StrategyCounts,
    pub test_count: usize,
    pub noise: NoiseConfig,
    pub split: SplitSpec,
    pub network: NetworkKind,
    pub data: DataSelection,
    /// Seeds inside are replaced by ones derived from `seed`.
    pub model: TwoStageConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

// streams of the master seed
const TRAIN_CORPUS: u64 = 1;
const TEST_CORPUS: u64 = 2;
const CAPTURES: u64 = 3;
const TEST_PLANS: u64 = 4;
const INIT: u64 = 5;
const SHUFFLE: u64 = 6;

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        // the desk preset is the benchmark setup the ablation runs on
        let bench = BenchConfig::default();
        let mut cfg = Self {
            preset,
            seed: 0,
            width: bench.width,
            height: bench.height,
            camera: bench.camera,
            corpus_size: bench.corpus_size,
            corpus: bench.corpus,
            scene: bench.scene,
            hint: bench.hint,
            counts: StrategyCounts { rd: bench.rd_count, sd: bench.sd_count, md: bench.md_count, nd: bench.nd_count },
            test_count: bench.test_count,
            noise: NoiseConfig { scale: bench.noise_scale, ..NoiseConfig::default() },
            split: bench.split,
            network: NetworkKind::TwoStage,
            data: DataSelection::default(),
            model: bench.model,
        };
        if preset == Preset::Full {
            let defaults = TwoStageConfig::default();
            cfg.width = 640;
            cfg.height = 480;
            cfg.camera = CameraIntrinsics { fx: 475.0, fy: 475.0, cx: 320.0, cy: 240.0 };
            cfg.model.recipe = defaults.recipe;
            cfg.model.stage1 = TrainConfig::full_scale();
            cfg.model.stage2 = TrainConfig { epochs: defaults.stage2.epochs, lr_step_epochs: defaults.stage2.lr_step_epochs, ..TrainConfig::full_scale() };
        }
        cfg
    }

    /// Parses `text` over the preset it names (desk when absent).
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let user: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("config is not JSON: {e}")))?;
        let Value::Object(_) = &user else {
            return Err(CliError::config("config must be a JSON object"));
        };
        let preset = match user.get("preset") {
            Some(p) => serde_json::from_value(p.clone())
                .map_err(|_| CliError::config(format!("preset: expected \"desk\" or \"full\", got {p}")))?,
            None => Preset::Desk,
        };
        let mut merged = serde_json::to_value(Self::preset(preset)).expect("config serializes");
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError { msg: format!("{}: {}", path.display(), e.msg), ..e })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |field: &str, r: crate::Result<()>| r.map_err(|e| CliError::config(format!("{field}: {e}")));
        if self.width == 0 || self.height == 0 {
            return Err(CliError::config(format!("width/height: image must be non-empty, got {}x{}", self.width, self.height)));
        }
        check("camera", self.camera.validate())?;
        if self.corpus.subjects == 0 {
            return Err(CliError::config("corpus.subjects: must be >= 1"));
        }
        let frames = self.counts.rd + self.counts.sd + self.counts.md + self.counts.nd;
        if frames > 0 && self.corpus_size == 0 {
            return Err(CliError::config("corpus_size: must be >= 1 when frames are requested"));
        }
        if !(self.noise.scale >= 0.0 && self.noise.scale.is_finite()) {
            return Err(CliError::config(format!("noise.scale: must be >= 0, got {}", self.noise.scale)));
        }
        if self.counts.nd > 0 && self.noise.subsets.is_empty() {
            return Err(CliError::config("noise.subsets: must list at least one subset"));
        }
        if self.hint.mcp_jitter < 0.0 {
            return Err(CliError::config("hint.mcp_jitter: must be >= 0"));
        }
        check("split", self.split.validate())?;
        check("model.recipe", self.model.recipe.validate())?;
        check("model.refine", self.model.refine.validate())?;
        check("model.stage1", self.model.stage1.validate())?;
        check("model.stage2", self.model.stage2.validate())?;
        if self.model.hidden.contains(&0) {
            return Err(CliError::config("model.hidden: layer widths must be >= 1"));
        }
        if self.data.stage1.is_empty() {
            return Err(CliError::config("data.stage1: must list at least one strategy"));
        }
        if self.network == NetworkKind::TwoStage && self.data.stage2.is_empty() {
            return Err(CliError::config("data.stage2: must list at least one strategy"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn train_corpus_seed(&self) -> u64 {
        derive_seed(self.seed, &[TRAIN_CORPUS])
    }

    pub fn test_corpus_seed(&self) -> u64 {
        derive_seed(self.seed, &[TEST_CORPUS])
    }

    pub fn capture_seed(&self) -> u64 {
        derive_seed(self.seed, &[CAPTURES])
    }

    pub fn test_plan_seed(&self) -> u64 {
        derive_seed(self.seed, &[TEST_PLANS])
    }

    /// Plan seed of the frames of one strategy. RD shares the capture seed so
    /// MD frames are blended over the matching RD frame.
    pub fn plan_seed(&self, s: Strategy) -> u64 {
        match s {
            Strategy::RD => self.capture_seed(),
            s => derive_seed(self.seed, &[10 + s as u64]),
        }
    }

    /// The model config with every seed derived from the master seed.
    pub fn seeded_model(&self) -> TwoStageConfig {
        let mut m = self.model.clone();
        m.seed = derive_seed(self.seed, &[INIT]);
        m.stage1.seed = derive_seed(self.seed, &[SHUFFLE, 1]);
        m.stage2.seed = derive_seed(self.seed, &[SHUFFLE, 2]);
        m
    }
}

/// Overwrites `base` with `over`, recursing into objects present in both.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
