use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blend::blend;
use crate::depth::{joint, read_pgm, write_pgm, CameraIntrinsics, DepthImage, Pose};
use crate::seed::derive_seed;
use crate::synth::{
    render_capture, render_hand, sample_noised_params, CorpusRecord, HandParams, NoiseSubset,
    ParamStats, SceneConfig, SkeletonTopology,
};
use crate::{Error, Result};

const CAPTURE_STREAM: u64 = 0xCA97;
const HINT_STREAM: u64 = 0x4114;
const NOISE_STREAM: u64 = 0x4015;

/// How a training frame was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Sensor capture of a corpus hand.
    RD,
    /// Clean render of the corpus parameters.
    SD,
    /// Clean render pasted over the paired capture.
    MD,
    /// Clean render of Gaussian-noised corpus parameters.
    ND,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::RD, Strategy::SD, Strategy::MD, Strategy::ND];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::RD => "RD",
            Strategy::SD => "SD",
            Strategy::MD => "MD",
            Strategy::ND => "ND",
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|t| t.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown strategy {s:?}, expected RD, SD, MD or ND")))
    }
}

/// Where the stage-one crop should be centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hint {
    /// Estimated middle-finger MCP in camera space (mm).
    Mcp([f64; 3]),
    /// 2D box `[u0, v0, u1, v1]` in pixels.
    Bbox([f64; 4]),
}

/// Per-axis jitter of the MCP hints attached to generated frames, emulating
/// an upstream hand detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HintConfig {
    pub mcp_jitter: f64,
}

impl Default for HintConfig {
    fn default() -> Self {
        Self { mcp_jitter: 10.0 }
    }
}

/// Parameter noise for ND frames. Entry `i` uses `subsets[i % subsets.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub scale: f64,
    pub subsets: Vec<NoiseSubset>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            scale: 0.1,
            subsets: NoiseSubset::ALL_SUBSETS.to_vec(),
        }
    }
}

/// Everything needed to render one frame, fixed before any pixel is drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePlan {
    pub strategy: Strategy,
    pub index: usize,
    /// Corpus entry the frame derives from; MD frames pair with its capture.
    pub corpus_index: usize,
    pub params: HandParams,
    pub subject: Option<u32>,
    pub noise: Option<NoiseSubset>,
    pub seed: u64,
}

/// Seed of the simulated capture of corpus entry `corpus_index`.
pub fn capture_seed(master: u64, corpus_index: usize) -> u64 {
    derive_seed(master, &[CAPTURE_STREAM, corpus_index as u64])
}

/// Decides the parameters of `count` frames of one strategy. ND frames draw
/// their base entry at random and need corpus statistics. Deterministic in `seed`.
pub fn plan_frames(
    strategy: Strategy,
    corpus: &[CorpusRecord],
    count: usize,
    noise: &NoiseConfig,
    stats: Option<&ParamStats>,
    seed: u64,
) -> Result<Vec<FramePlan>> {
    if corpus.is_empty() && count > 0 {
        return Err(Error::domain(format!("{strategy} frames need a non-empty corpus")));
    }
    let stats = match strategy {
        Strategy::ND => {
            if noise.subsets.is_empty() {
                return Err(Error::domain("ND frames need at least one noise subset"));
            }
            Some(stats.ok_or_else(|| Error::domain("ND frames need corpus statistics"))?)
        }
        _ => None,
    };
    (0..count)
        .map(|i| {
            let entry_seed = derive_seed(seed, &[strategy.code(), i as u64]);
            let (corpus_index, params, subset) = match stats {
                Some(stats) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(entry_seed);
                    let ci = rng.random_range(0..corpus.len());
                    let subset = noise.subsets[i % noise.subsets.len()];
                    let noised = sample_noised_params(
                        &corpus[ci].params,
                        stats,
                        subset,
                        noise.scale,
                        derive_seed(entry_seed, &[NOISE_STREAM]),
                    )?;
                    (ci, noised, Some(subset))
                }
                None => {
                    let ci = i % corpus.len();
                    (ci, corpus[ci].params.clone(), None)
                }
            };
            let seed = match strategy {
                Strategy::RD => capture_seed(seed, corpus_index),
                _ => entry_seed,
            };
            Ok(FramePlan {
                strategy,
                index: i,
                corpus_index,
                params,
                subject: corpus[corpus_index].subject,
                noise: subset,
                seed,
            })
        })
        .collect()
}

/// Camera, image size and scene used to turn plans into images.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSetup {
    pub topo: SkeletonTopology,
    pub camera: CameraIntrinsics,
    pub width: usize,
    pub height: usize,
    pub scene: SceneConfig,
    pub hint: HintConfig,
}

/// A rendered or loaded training frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: DepthImage,
    pub pose: Pose,
    pub hint: Option<Hint>,
    pub params: Option<HandParams>,
    pub subject: Option<u32>,
}

/// Source of the real frame paired with each corpus entry.
pub trait RealFrames: Send + Sync {
    fn real_frame(&self, corpus_index: usize) -> Result<DepthImage>;
}

/// Simulated captures of a corpus, identical to the RD frames built with the same seed.
pub struct SimulatedCaptures {
    pub corpus: Arc<Vec<CorpusRecord>>,
    pub setup: Arc<RenderSetup>,
    pub seed: u64,
}

impl RealFrames for SimulatedCaptures {
    fn real_frame(&self, corpus_index: usize) -> Result<DepthImage> {
        let record = self.corpus.get(corpus_index).ok_or_else(|| {
            Error::domain(format!("no capture paired with corpus entry {corpus_index}"))
        })?;
        let s = &self.setup;
        let (img, _) = render_capture(
            &record.params,
            &s.topo,
            &s.camera,
            s.width,
            s.height,
            &s.scene,
            capture_seed(self.seed, corpus_index),
        )?;
        Ok(img)
    }
}

/// Real frames stored as depth files, one per corpus entry.
pub struct RealFrameFiles {
    pub paths: Vec<PathBuf>,
}

impl RealFrames for RealFrameFiles {
    fn real_frame(&self, corpus_index: usize) -> Result<DepthImage> {
        let path = self.paths.get(corpus_index).ok_or_else(|| {
            Error::domain(format!("no real image paired with corpus entry {corpus_index}"))
        })?;
        read_pgm(path)
    }
}

fn jittered_hint(pose: &Pose, cfg: &HintConfig, seed: u64) -> Result<Hint> {
    let mcp = pose.joints()[joint::MIDDLE_MCP];
    let sigma = cfg.mcp_jitter.max(0.0);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[HINT_STREAM]));
    let d = Vector3::from_fn(|_, _| noise.sample(&mut rng));
    let h = mcp + d;
    Ok(Hint::Mcp([h.x, h.y, h.z]))
}

/// Renders one planned frame. SD and ND frames are clean renders rounded to
/// millimeters; MD frames paste the clean render over `real`'s paired frame.
pub fn render_plan(plan: &FramePlan, setup: &RenderSetup, real: Option<&dyn RealFrames>) -> Result<Frame> {
    let (w, h) = (setup.width, setup.height);
    let (image, pose) = match plan.strategy {
        Strategy::RD => render_capture(&plan.params, &setup.topo, &setup.camera, w, h, &setup.scene, plan.seed)?,
        Strategy::SD | Strategy::ND => {
            let (img, pose) = render_hand(&plan.params, &setup.topo, &setup.camera, w, h)?;
            (img.quantized(), pose)
        }
        Strategy::MD => {
            let real = real.ok_or_else(|| Error::domain("MD frames need paired real frames"))?;
            let backdrop = real.real_frame(plan.corpus_index)?;
            let (img, pose) = render_hand(&plan.params, &setup.topo, &setup.camera, w, h)?;
            (blend(&img.quantized(), &backdrop)?, pose)
        }
    };
    let hint = jittered_hint(&pose, &setup.hint, plan.seed)?;
    Ok(Frame {
        image,
        pose,
        hint: Some(hint),
        params: Some(plan.params.clone()),
        subject: plan.subject,
    })
}

/// Random access to frames, whether stored on disk or rendered on demand.
pub trait FrameSource: Send + Sync {
    fn len(&self) -> usize;

    fn frame(&self, index: usize) -> Result<Frame>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Renders frames from plans on every access; nothing touches the disk.
#[derive(Clone)]
pub struct PlanSource {
    pub plans: Arc<Vec<FramePlan>>,
    pub setup: Arc<RenderSetup>,
    pub real: Option<Arc<dyn RealFrames>>,
}

impl FrameSource for PlanSource {
    fn len(&self) -> usize {
        self.plans.len()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        render_plan(&self.plans[index], &self.setup, self.real.as_deref())
    }
}

/// Frames of several sources back to back.
#[derive(Clone, Default)]
pub struct ConcatSource {
    parts: Vec<Arc<dyn FrameSource>>,
}

impl ConcatSource {
    pub fn new(parts: Vec<Arc<dyn FrameSource>>) -> Self {
        Self { parts }
    }

    pub fn push(&mut self, part: Arc<dyn FrameSource>) {
        self.parts.push(part);
    }
}

impl FrameSource for ConcatSource {
    fn len(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    fn frame(&self, mut index: usize) -> Result<Frame> {
        for p in &self.parts {
            if index < p.len() {
                return p.frame(index);
            }
            index -= p.len();
        }
        Err(Error::domain(format!("frame index {index} past the end of the sources")))
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub image: String,
    /// 21 joints as 63 floats (mm).
    pub pose: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HandParams>,
    pub strategy: Strategy,
    pub splits: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSubset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<Hint>,
}

/// JSON-lines index of depth files and their ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    /// Directory image paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::Format {
                what: "manifest entry",
                path: path.to_path_buf(),
                msg: format!("line {}: {e}", n + 1),
            })?;
            entries.push(entry);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.entries {
            let line = serde_json::to_string(e).expect("manifest entries serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    /// Checks that every image exists and every pose has 21 joints.
    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            let p = self.image_path(e);
            if !p.is_file() {
                return Err(Error::domain(format!("manifest image {} does not exist", p.display())));
            }
            if e.pose.len() != 3 * joint::COUNT {
                return Err(Error::shape(format!("{}: pose has {} values", e.image, e.pose.len())));
            }
        }
        Ok(())
    }

    /// Entries carrying `split` among their split tags.
    pub fn split(&self, split: &str) -> Self {
        Self {
            root: self.root.clone(),
            entries: self.entries.iter().filter(|e| e.splits.iter().any(|s| s == split)).cloned().collect(),
        }
    }

    pub fn count(&self, strategy: Strategy) -> usize {
        self.entries.iter().filter(|e| e.strategy == strategy).count()
    }
}

/// Manifest frames read from disk on access.
#[derive(Debug, Clone)]
pub struct ManifestSource {
    pub manifest: DatasetManifest,
}

impl FrameSource for ManifestSource {
    fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        let e = &self.manifest.entries[index];
        Ok(Frame {
            image: read_pgm(&self.manifest.image_path(e))?,
            pose: Pose::from_flat(&e.pose)?,
            hint: e.hint,
            params: e.params.clone(),
            subject: e.subject,
        })
    }
}

/// Renders `plans` in parallel, writes `images/<split>_<strategy>_<index>.pgm`
/// under `dir` and returns the entries. Output does not depend on thread count.
pub fn build_dataset(
    plans: &[FramePlan],
    setup: &RenderSetup,
    real: Option<&dyn RealFrames>,
    dir: &Path,
    split: &str,
) -> Result<DatasetManifest> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let entries = plans
        .par_iter()
        .map(|plan| {
            let frame = render_plan(plan, setup, real)?;
            let name = format!("images/{split}_{}_{:06}.pgm", plan.strategy, plan.index);
            write_pgm(&frame.image, &dir.join(&name))?;
            Ok(ManifestEntry {
                image: name,
                pose: frame.pose.to_flat(),
                params: frame.params,
                strategy: plan.strategy,
                splits: vec![split.to_string()],
                noise: plan.noise,
                subject: plan.subject,
                hint: frame.hint,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetManifest {
        root: dir.to_path_buf(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, CorpusConfig};

    fn setup() -> RenderSetup {
        RenderSetup {
            topo: SkeletonTopology::hand(),
            camera: CameraIntrinsics::new(118.75, 118.75, 40.0, 30.0).unwrap(),
            width: 80,
            height: 60,
            scene: SceneConfig::default(),
            hint: HintConfig::default(),
        }
    }

    fn corpus(n: usize) -> Vec<CorpusRecord> {
        generate_corpus(n, &CorpusConfig::default(), &SkeletonTopology::hand(), 3, |_, _| false).unwrap()
    }

    #[test]
    fn sd_frames_reproduce_from_stored_params() {
        let dir = tempfile::tempdir().unwrap();
        let s = setup();
        let plans = plan_frames(Strategy::SD, &corpus(6), 10, &NoiseConfig::default(), None, 1).unwrap();
        let m = build_dataset(&plans, &s, None, dir.path(), "train").unwrap();
        assert_eq!(m.entries.len(), 10);
        m.save(&dir.path().join("manifest.jsonl")).unwrap();
        let loaded = DatasetManifest::load(&dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(loaded, m);
        loaded.validate().unwrap();
        for e in &loaded.entries {
            let stored = read_pgm(&loaded.image_path(e)).unwrap();
            let (img, pose) = render_hand(e.params.as_ref().unwrap(), &s.topo, &s.camera, s.width, s.height).unwrap();
            assert_eq!(stored, img.quantized());
            assert_eq!(e.pose, pose.to_flat());
            assert_eq!(e.strategy, Strategy::SD);
        }
    }

    #[test]
    fn nd_splits_evenly_across_subsets() {
        let c = corpus(8);
        let stats = ParamStats::from_corpus(c.iter().map(|r| &r.params)).unwrap();
        let plans = plan_frames(Strategy::ND, &c, 8, &NoiseConfig::default(), Some(&stats), 2).unwrap();
        for subset in NoiseSubset::ALL_SUBSETS {
            assert_eq!(plans.iter().filter(|p| p.noise == Some(subset)).count(), 2);
        }
        assert!(plan_frames(Strategy::ND, &c, 8, &NoiseConfig::default(), None, 2).is_err());
    }

    #[test]
    fn md_pixels_come_from_render_or_paired_capture() {
        let c = Arc::new(corpus(4));
        let s = Arc::new(setup());
        let real = SimulatedCaptures { corpus: c.clone(), setup: s.clone(), seed: 9 };
        let plans = plan_frames(Strategy::MD, &c, 4, &NoiseConfig::default(), None, 9).unwrap();
        let rd = plan_frames(Strategy::RD, &c, 4, &NoiseConfig::default(), None, 9).unwrap();
        for (p, r) in plans.iter().zip(&rd) {
            let md = render_plan(p, &s, Some(&real)).unwrap();
            let capture = render_plan(r, &s, None).unwrap();
            let (clean, _) = render_hand(&p.params, &s.topo, &s.camera, s.width, s.height).unwrap();
            let clean = clean.quantized();
            for ((m, syn), cap) in md.image.data().iter().zip(clean.data()).zip(capture.image.data()) {
                assert_eq!(*m, if *syn > 0.0 { *syn } else { *cap });
            }
        }
        assert!(render_plan(&plans[0], &s, None).is_err());
        let files = RealFrameFiles { paths: vec![] };
        assert!(render_plan(&plans[0], &s, Some(&files)).is_err());
    }

    #[test]
    fn builds_are_reproducible() {
        let c = corpus(5);
        let s = setup();
        let plans = plan_frames(Strategy::RD, &c, 5, &NoiseConfig::default(), None, 4).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = build_dataset(&plans, &s, None, a.path(), "test").unwrap();
        let mb = build_dataset(&plans, &s, None, b.path(), "test").unwrap();
        assert_eq!(ma.entries, mb.entries);
        for e in &ma.entries {
            let x = std::fs::read(a.path().join(&e.image)).unwrap();
            let y = std::fs::read(b.path().join(&e.image)).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn concat_source_indexes_across_parts() {
        let c = corpus(3);
        let s = Arc::new(setup());
        let sd = PlanSource {
            plans: Arc::new(plan_frames(Strategy::SD, &c, 2, &NoiseConfig::default(), None, 1).unwrap()),
            setup: s.clone(),
            real: None,
        };
        let rd = PlanSource {
            plans: Arc::new(plan_frames(Strategy::RD, &c, 3, &NoiseConfig::default(), None, 1).unwrap()),
            setup: s.clone(),
            real: None,
        };
        let all = ConcatSource::new(vec![Arc::new(sd.clone()), Arc::new(rd.clone())]);
        assert_eq!(all.len(), 5);
        assert_eq!(all.frame(3).unwrap(), rd.frame(1).unwrap());
        assert_eq!(all.frame(1).unwrap(), sd.frame(1).unwrap());
        assert!(all.frame(5).is_err());
    }

    #[test]
    fn strategy_tags_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.tag().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.tag()));
        }
        assert!("XD".parse::<Strategy>().is_err());
    }
}
