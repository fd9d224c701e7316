//! File formats: WGT1 grids, JSON documents, weight manifests, OBJ
//! wireframes and CSV reports. Every error carries the offending path.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use wkit_core::assemble::{Adjacency, CandidateGraph, JunctionEntry};
use wkit_core::gnn::{GnnDims, GnnModel};
use wkit_core::linalg::{Matrix, Real};
use wkit_core::metrics::SapReport;
use wkit_core::wireframe3d::{LineLabel, WireframeModel};
use wkit_core::{Annotation, Grid, GridData, Intrinsics, Pose, Quadruplet, Role, Vec3};

use crate::error::{CliError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    Grid::from_bytes(&read_bytes(path)?).map_err(|e| CliError::core(path, e))
}

pub fn write_grid(grid: &Grid, path: &Path) -> Result<()> {
    let bytes = grid.to_bytes().map_err(|e| CliError::core(path, e))?;
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::json(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes())
}

pub fn read_annotation(path: &Path) -> Result<Annotation> {
    read_json(path)
}

pub fn write_annotation(ann: &Annotation, path: &Path) -> Result<()> {
    ann.validate().map_err(|e| CliError::core(path, e))?;
    write_json(ann, path)
}

/// JSON form `{"fx","fy","cx","cy","pose":[12 row-major values]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraDoc {
    #[serde(flatten)]
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

pub fn read_camera(path: &Path) -> Result<CameraDoc> {
    read_json(path)
}

/// Scored or unscored 2D lines in image pixels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinesDoc {
    pub lines: Vec<Quadruplet>,
}

/// A candidate graph with its adjacency in coordinate-list form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: Vec<Quadruplet>,
    pub junctions: Vec<JunctionEntry>,
    /// Undirected edges `[i, j]` with `i < j`.
    pub adjacency: Vec<[usize; 2]>,
}

impl GraphDoc {
    pub fn from_graph(g: &CandidateGraph) -> Self {
        Self { vertices: g.vertices.clone(), junctions: g.junctions.clone(), adjacency: g.adjacency.edges() }
    }

    pub fn into_graph(self) -> wkit_core::Result<CandidateGraph> {
        let adjacency = Adjacency::from_edges(self.vertices.len(), &self.adjacency)?;
        Ok(CandidateGraph { vertices: self.vertices, junctions: self.junctions, adjacency })
    }
}

/// Weight manifest: one WGT1 file per tensor, paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsManifest {
    pub dims: GnnDims,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub file: PathBuf,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `dir/manifest.json` plus `dir/<tensor>.wgt` in the model's precision.
pub fn save_weights<T: Real>(model: &GnnModel<T>, dir: &Path) -> Result<PathBuf> {
    let mut tensors = Vec::new();
    for (name, m) in model.tensors() {
        let file = PathBuf::from(format!("{name}.wgt"));
        let dims = vec![m.rows(), m.cols()];
        let data: Vec<f64> = m.as_slice().iter().map(|v| v.to_f64()).collect();
        let grid = if std::mem::size_of::<T>() == 4 {
            Grid::from_f32(dims, Role::Generic, data.iter().map(|&v| v as f32).collect())
        } else {
            Grid::from_f64(dims, Role::Generic, data)
        };
        let path = dir.join(&file);
        write_grid(&grid.map_err(|e| CliError::core(&path, e))?, &path)?;
        tensors.push(TensorEntry { name, shape: [m.rows(), m.cols()], file });
    }
    let manifest = dir.join(MANIFEST_NAME);
    write_json(&WeightsManifest { dims: model.dims, tensors }, &manifest)?;
    Ok(manifest)
}

/// Loads a model from a manifest path or a directory containing one.
pub fn load_weights<T: Real>(path: &Path) -> Result<GnnModel<T>> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_owned() };
    let manifest: WeightsManifest = read_json(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut named = Vec::with_capacity(manifest.tensors.len());
    for t in &manifest.tensors {
        let p = base.join(&t.file);
        let grid = read_grid(&p)?;
        if grid.dims() != t.shape {
            let e = wkit_core::Error::Shape { op: "load_weights", detail: format!("{} declares {:?}, file holds {:?}", t.name, t.shape, grid.dims()) };
            return Err(CliError::core(&p, e));
        }
        let values: Vec<T> = match grid.data() {
            GridData::F32(d) => d.iter().map(|&v| T::from_f64(v as f64)).collect(),
            GridData::F64(d) => d.iter().map(|&v| T::from_f64(v)).collect(),
        };
        named.push((t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], values).map_err(|e| CliError::core(&p, e))?));
    }
    GnnModel::from_tensors(manifest.dims, named).map_err(|e| CliError::core(&manifest_path, e))
}

/// PR curve as CSV, one row per ranked prediction.
pub fn pr_curve_csv(report: &SapReport) -> String {
    let mut s = String::from("rank,image,score,true_positive,precision,recall\n");
    for (k, p) in report.curve.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{},{},{}", k + 1, p.image, p.score, p.true_positive as u8, p.precision, p.recall);
    }
    s
}

/// One OBJ line element and what it represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDoc {
    /// 1-based OBJ vertex indices of the element.
    pub vertices: [usize; 2],
    pub label: LineLabel,
    pub planes: Option<[u32; 2]>,
    pub confidence: f64,
    pub low_confidence: bool,
    /// Crease fragments merged into this element; 0 for non-crease lines.
    pub fragments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneDoc {
    pub id: u32,
    pub normal: Vec3,
    pub offset: f64,
    pub count: usize,
}

/// JSON sidecar of a wireframe OBJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireframeDoc {
    pub elements: Vec<ElementDoc>,
    pub planes: Vec<PlaneDoc>,
    /// Axis-aligned bounds of the merged creases, meters.
    pub extents: Option<[Vec3; 2]>,
    pub warnings: Vec<String>,
}

/// OBJ text and sidecar for a fused model. Merged creases come first, then
/// occlusion and texture lines that have 3D endpoints.
pub fn wireframe_obj(model: &WireframeModel) -> (String, WireframeDoc) {
    let mut obj = String::from("# wkit wireframe\n");
    let mut elements = Vec::new();
    let mut verts = 0usize;
    let mut push = |obj: &mut String, e: [Vec3; 2]| {
        for p in e {
            let _ = writeln!(obj, "v {} {} {}", p.x, p.y, p.z);
        }
        verts += 2;
        [verts - 1, verts]
    };
    for c in &model.creases {
        let vertices = push(&mut obj, c.endpoints);
        elements.push(ElementDoc { vertices, label: LineLabel::Crease, planes: Some(c.planes), confidence: 1.0, low_confidence: false, fragments: c.fragments });
    }
    for l in model.lines.iter().filter(|l| l.label != LineLabel::Crease) {
        if let Some(e) = l.endpoints {
            let vertices = push(&mut obj, e);
            elements.push(ElementDoc { vertices, label: l.label, planes: l.planes, confidence: l.confidence, low_confidence: l.low_confidence, fragments: 0 });
        }
    }
    for e in &elements {
        let _ = writeln!(obj, "l {} {}", e.vertices[0], e.vertices[1]);
    }
    let planes = model.planes.planes.iter().map(|p| PlaneDoc { id: p.id, normal: p.normal, offset: p.offset, count: p.count() }).collect();
    let doc = WireframeDoc { elements, planes, extents: model.extents().map(|(a, b)| [a, b]), warnings: model.warnings.clone() };
    (obj, doc)
}

/// Sidecar path next to an OBJ: `room.obj` becomes `room.json`.
pub fn sidecar_path(obj: &Path) -> PathBuf {
    obj.with_extension("json")
}
