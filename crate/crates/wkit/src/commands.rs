//! File-level implementations of the subcommands. Each takes paths and a
//! resolved config and returns the document it would print.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wkit_core::decode::{DecodeMaps, Decoded};
use wkit_core::gnn::toy::{self, ToyConfig};
use wkit_core::gnn::{accuracy, gradient_check, train_toy, GnnDims, GnnModel};
use wkit_core::metrics::{sap_annotations, SapConfig, SapReport, ScoredSegment};
use wkit_core::pipeline::{assemble_stage, decode_stage, detect, pool_stage, score_stage};
use wkit_core::supervision::make_gt_maps;
use wkit_core::wireframe3d::{fuse_sequence, FrameInput, WireframeModel};
use wkit_core::{Annotation, CameraFrame, Grid};

use rand::{Rng, SeedableRng};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::io::{self, GraphDoc, LinesDoc};

/// Standard file names of the five decoder maps inside a maps directory.
pub const MAP_FILES: [&str; 5] = ["junction_heat.wgt", "junction_offset.wgt", "center_heat.wgt", "center_offset.wgt", "shift.wgt"];
pub const MASK_FILES: [&str; 2] = ["junction_mask.wgt", "center_mask.wgt"];

/// Paths of the five decoder maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPaths {
    pub junction_heat: PathBuf,
    pub junction_offset: PathBuf,
    pub center_heat: PathBuf,
    pub center_offset: PathBuf,
    pub shift: PathBuf,
}

impl MapPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let p = |i: usize| dir.join(MAP_FILES[i]);
        Self { junction_heat: p(0), junction_offset: p(1), center_heat: p(2), center_offset: p(3), shift: p(4) }
    }

    pub fn read(&self) -> Result<DecodeMaps> {
        Ok(DecodeMaps {
            junction_heat: io::read_grid(&self.junction_heat)?,
            junction_offset: io::read_grid(&self.junction_offset)?,
            center_heat: io::read_grid(&self.center_heat)?,
            center_offset: io::read_grid(&self.center_offset)?,
            shift: io::read_grid(&self.shift)?,
        })
    }
}

pub fn cmd_decode(maps: &MapPaths, cfg: &PipelineConfig) -> Result<Decoded> {
    Ok(decode_stage(&maps.read()?, &cfg.decode)?)
}

pub fn cmd_assemble(decoded: &Path, cfg: &PipelineConfig) -> Result<GraphDoc> {
    let d: Decoded = io::read_json(decoded)?;
    Ok(GraphDoc::from_graph(&assemble_stage(&d, &cfg.assemble)?))
}

fn weights_path(explicit: Option<&Path>, cfg: &PipelineConfig) -> Result<PathBuf> {
    explicit
        .map(Path::to_owned)
        .or_else(|| cfg.gnn.weights.clone())
        .ok_or_else(|| CliError::Usage("no weights given: pass --weights or set gnn.weights in the config".into()))
}

pub fn cmd_score(graph: &Path, features: &Path, weights: Option<&Path>, cfg: &PipelineConfig) -> Result<LinesDoc> {
    let doc: GraphDoc = io::read_json(graph)?;
    let graph = doc.into_graph().map_err(|e| CliError::core(graph, e))?;
    let feats = io::read_grid(features)?;
    let model: GnnModel<f32> = io::load_weights(&weights_path(weights, cfg)?)?;
    let pooled = pool_stage(&feats, &graph, &cfg.pool, cfg.decode.output_stride)?;
    Ok(LinesDoc { lines: score_stage(&model, &graph, &pooled)? })
}

pub fn detect_one(maps: &MapPaths, features: &Path, model: &GnnModel<f32>, cfg: &PipelineConfig) -> Result<LinesDoc> {
    let m = maps.read()?;
    let f = io::read_grid(features)?;
    Ok(LinesDoc { lines: detect(&m, &f, model, &cfg.detect())? })
}

pub fn cmd_detect(maps: &MapPaths, features: &Path, weights: Option<&Path>, cfg: &PipelineConfig) -> Result<LinesDoc> {
    let model: GnnModel<f32> = io::load_weights(&weights_path(weights, cfg)?)?;
    detect_one(maps, features, &model, cfg)
}

/// Batch detection input: one entry per image, paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    pub images: Vec<BatchImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchImage {
    pub name: String,
    /// Directory holding the five standard map files.
    pub maps: PathBuf,
    pub features: PathBuf,
}

/// Detects every image of a batch on up to `jobs` threads and writes
/// `<out_dir>/<name>.json`. Returns the written paths in manifest order.
pub fn cmd_detect_batch(manifest: &Path, out_dir: &Path, weights: Option<&Path>, jobs: usize, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let batch: BatchManifest = io::read_json(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let model: GnnModel<f32> = io::load_weights(&weights_path(weights, cfg)?)?;
    let jobs = jobs.clamp(1, batch.images.len().max(1));
    let run = |img: &BatchImage| -> Result<PathBuf> {
        let doc = detect_one(&MapPaths::in_dir(&base.join(&img.maps)), &base.join(&img.features), &model, cfg)?;
        let out = out_dir.join(format!("{}.json", img.name));
        io::write_json(&doc, &out)?;
        Ok(out)
    };
    let results: Vec<Result<PathBuf>> = std::thread::scope(|s| {
        let chunk = batch.images.len().div_ceil(jobs).max(1);
        let handles: Vec<_> = batch.images.chunks(chunk).map(|c| s.spawn(move || c.iter().map(run).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("detection workers do not panic")).collect()
    });
    results.into_iter().collect()
}

/// Writes the seven GT grids into `out_dir`.
pub fn cmd_make_gt(ann: &Path, stride: f64, sigma: f64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let a = io::read_annotation(ann)?;
    let gt = make_gt_maps(&a, stride, sigma).map_err(|e| CliError::core(ann, e))?;
    let grids: [(&str, &Grid); 7] = [
        (MAP_FILES[0], &gt.junction_heat),
        (MAP_FILES[1], &gt.junction_offset),
        (MAP_FILES[2], &gt.center_heat),
        (MAP_FILES[3], &gt.center_offset),
        (MAP_FILES[4], &gt.shift),
        (MASK_FILES[0], &gt.junction_mask),
        (MASK_FILES[1], &gt.center_mask),
    ];
    grids
        .into_iter()
        .map(|(name, g)| {
            let p = out_dir.join(name);
            io::write_grid(g, &p).map(|_| p)
        })
        .collect()
}

/// A single document or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            Self::Many(v) => v,
            Self::One(x) => vec![x],
        }
    }
}

/// sAP of predicted lines (one lines document per image) against
/// annotations, in image pixels; both files may hold one item or a list.
pub fn cmd_eval_sap(pred: &Path, gt: &Path, sap: &SapConfig) -> Result<SapReport> {
    let preds: Vec<LinesDoc> = io::read_json::<OneOrMany<LinesDoc>>(pred)?.into_vec();
    let anns: Vec<Annotation> = io::read_json::<OneOrMany<Annotation>>(gt)?.into_vec();
    let segs: Vec<Vec<ScoredSegment>> =
        preds.iter().map(|d| d.lines.iter().map(|q| ScoredSegment::new(q.j1, q.j2, q.score)).collect()).collect();
    Ok(sap_annotations(&segs, &anns, sap)?)
}

/// Frames to fuse, in time order; paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesManifest {
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    /// WGT1 depth grid in meters (0 = invalid).
    pub depth: PathBuf,
    pub camera: PathBuf,
    /// Lines document from `score` or `detect`.
    pub lines: PathBuf,
    /// Optional WGT1 plane-label grid replacing plane detection.
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

pub fn load_frames(manifest: &Path) -> Result<Vec<FrameInput>> {
    let m: FramesManifest = io::read_json(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    m.frames
        .iter()
        .map(|f| {
            let cam = io::read_camera(&base.join(&f.camera))?;
            let depth_path = base.join(&f.depth);
            let frame = CameraFrame::new(cam.intrinsics, cam.pose, io::read_grid(&depth_path)?).map_err(|e| CliError::core(&depth_path, e))?;
            let lines: LinesDoc = io::read_json(&base.join(&f.lines))?;
            let plane_labels = f.labels.as_ref().map(|l| io::read_grid(&base.join(l))).transpose()?;
            Ok(FrameInput { frame, lines: lines.lines, plane_labels })
        })
        .collect()
}

/// Fuses the frames and writes the OBJ and its JSON sidecar.
pub fn cmd_fuse3d(manifest: &Path, out: &Path, cfg: &PipelineConfig) -> Result<WireframeModel> {
    let frames = load_frames(manifest)?;
    let model = fuse_sequence(&frames, &cfg.fusion).map_err(|e| CliError::core(manifest, e))?;
    let (obj, doc) = io::wireframe_obj(&model);
    io::write_bytes(out, obj.as_bytes())?;
    io::write_json(&doc, &io::sidecar_path(out))?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub graphs: usize,
    pub tolerance: f64,
    pub max_rel_err: f64,
    /// Worst relative error per tensor over all graphs.
    pub tensors: Vec<(String, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckArgs {
    pub graphs: usize,
    pub max_vertices: usize,
    pub layers: usize,
    pub h: f64,
    pub tolerance: f64,
    pub seed: u64,
}

/// Central-difference gradient check on random small graphs and models.
pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<GradcheckReport> {
    if a.max_vertices == 0 || a.graphs == 0 {
        return Err(CliError::Usage("gradcheck needs at least one graph with one vertex".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let dims = GnnDims { semantic_dim: 6, d: 5, head_hidden: 4, layers: a.layers };
    let mut worst: Vec<(String, f64)> = Vec::new();
    for _ in 0..a.graphs {
        let model = toy::random_model(&mut rng, dims, 0.8);
        let v = rng.random_range(1..=a.max_vertices);
        let sample = toy::random_sample(&mut rng, v, dims.semantic_dim);
        for c in gradient_check(&model, &sample.input, &sample.labels, a.h)? {
            match worst.iter_mut().find(|(n, _)| *n == c.name) {
                Some(w) => w.1 = w.1.max(c.max_rel_err),
                None => worst.push((c.name, c.max_rel_err)),
            }
        }
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(GradcheckReport { graphs: a.graphs, tolerance: a.tolerance, max_rel_err: max, tensors: worst, passed: max <= a.tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyTask {
    /// Label is the parity of class-1 neighbours; needs message passing.
    Parity,
    /// Label is the vertex's own class.
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainArgs {
    pub task: ToyTask,
    pub layers: usize,
    pub steps: usize,
    pub lr: f64,
    pub graphs: usize,
    pub pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub task: ToyTask,
    pub layers: usize,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Trains on one seeded split and evaluates on a held-out split.
pub fn cmd_train_toy(a: &TrainArgs) -> Result<(GnnModel<f64>, TrainSummary)> {
    let cfg = ToyConfig { graphs: a.graphs, pairs: a.pairs, ..ToyConfig::default() };
    let make = |seed| match a.task {
        ToyTask::Parity => toy::neighbor_parity(&cfg, seed),
        ToyTask::Separable => toy::separable(&cfg, seed),
    };
    let (train, test) = (make(a.seed), make(a.seed.wrapping_add(1_000_003)));
    let model = GnnModel::init(toy::toy_dims(a.layers), a.seed);
    let (model, report) = train_toy(model, &train, a.steps, a.lr)?;
    let summary = TrainSummary {
        task: a.task,
        layers: a.layers,
        steps: a.steps,
        initial_loss: report.losses.first().copied().unwrap_or(f64::NAN),
        final_loss: report.final_loss(),
        train_accuracy: accuracy(&model, &train)?,
        test_accuracy: accuracy(&model, &test)?,
    };
    Ok((model, summary))
}
