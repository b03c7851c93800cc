//! Model bundle directory: `net1.bin`, optional `net2.bin` and `metadata.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Recipe, TwoStageModel};
use crate::augment::RefineConfig;
use crate::depth::CameraIntrinsics;
use crate::regressor::{load_checkpoint, save_checkpoint};
use crate::wing::WingConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format_version: u32,
    pub stages: u32,
    pub fine_tuned: bool,
    pub recipe: Recipe,
    pub refine: RefineConfig,
    pub wing: WingConfig,
    pub layer_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraIntrinsics>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

pub fn save_bundle(model: &TwoStageModel, meta: &ModelMetadata, dir: &Path) -> Result<()> {
    model.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_checkpoint(&model.net1, &dir.join("net1.bin"))?;
    let net2 = dir.join("net2.bin");
    match &model.net2 {
        Some(n) => save_checkpoint(n, &net2)?,
        None if net2.exists() => std::fs::remove_file(&net2).map_err(|e| Error::io(&net2, e))?,
        None => {}
    }
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_bundle(dir: &Path) -> Result<(TwoStageModel, ModelMetadata)> {
    let path = dir.join("metadata.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: ModelMetadata = serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "model metadata",
        path: path.clone(),
        msg: e.to_string(),
    })?;
    let net1 = load_checkpoint(&dir.join("net1.bin"))?;
    let net2 = if meta.stages >= 2 { Some(load_checkpoint(&dir.join("net2.bin"))?) } else { None };
    let model = TwoStageModel { net1, net2, recipe: meta.recipe, refine: meta.refine };
    model.validate()?;
    Ok((model, meta))
}
