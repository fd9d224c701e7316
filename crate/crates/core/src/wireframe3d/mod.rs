//! Fusion of scored 2D lines and posed depth frames into a labeled 3D
//! wireframe.
//!
//! Each frame's planes are detected and merged into a global plane set by
//! overlap ratio and normal agreement. Every 2D line is then labeled from
//! the plane ids on its two sides, and crease fragments sharing a plane pair
//! collapse onto the intersection line of that pair.

mod classify;
pub mod hull;
mod planes;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assemble::Quadruplet;
use crate::{CameraFrame, Error, Grid, Result, Vec3};

pub use classify::{classify_line, LabeledLine, LineLabel};
pub use planes::{detect_planes, merge_plane, overlap_counts, planes_from_labels, DetectedPlane, MergeOutcome, Moments, Plane, PlaneSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Minimum `N_i / N_new` for merging into an existing plane.
    pub overlap_ratio: f64,
    /// Maximum unsigned normal angle for merging, degrees.
    pub normal_angle_deg: f64,
    /// Sample band on each side of a line, pixels.
    pub band_halfwidth: usize,
    /// Maximum per-side median depth difference for a crease, meters.
    pub depth_disparity: f64,
    /// Share of samples on one plane that makes a texture edge.
    pub peak_dominance: f64,
    /// Maximum relative gap between the two top plane counts of a crease.
    pub peak_similarity: f64,
    /// Minimum pixels in a detected plane.
    pub min_support: usize,
    /// Region-growing normal tolerance, degrees.
    pub grow_angle_deg: f64,
    /// Region-growing point-to-plane tolerance, meters.
    pub grow_distance: f64,
    /// Dilation of projected plane hulls during overlap counting, meters.
    pub projection_margin: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            overlap_ratio: 0.5,
            normal_angle_deg: 10.0,
            band_halfwidth: 6,
            depth_disparity: 0.15,
            peak_dominance: 0.8,
            peak_similarity: 0.3,
            min_support: 1000,
            grow_angle_deg: 8.0,
            grow_distance: 0.05,
            projection_margin: 1.5,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("overlap_ratio", self.overlap_ratio),
            ("normal_angle_deg", self.normal_angle_deg),
            ("depth_disparity", self.depth_disparity),
            ("peak_dominance", self.peak_dominance),
            ("peak_similarity", self.peak_similarity),
            ("grow_angle_deg", self.grow_angle_deg),
            ("grow_distance", self.grow_distance),
            ("projection_margin", self.projection_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("fusion config", format!("{name} = {v} must be positive")));
            }
        }
        if self.band_halfwidth == 0 || self.min_support == 0 {
            return Err(Error::invalid("fusion config", "band_halfwidth and min_support must be positive"));
        }
        if self.overlap_ratio > 1.0 || self.peak_dominance > 1.0 {
            return Err(Error::invalid("fusion config", "overlap_ratio and peak_dominance are fractions"));
        }
        if self.peak_dominance <= self.peak_similarity {
            return Err(Error::invalid("fusion config", "peak_dominance must exceed peak_similarity"));
        }
        Ok(())
    }
}

/// An infinite 3D line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line3 {
    pub point: Vec3,
    pub direction: Vec3,
}

impl Line3 {
    pub fn parameter(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.direction)
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.point + self.direction * s
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        p.dist(self.at(self.parameter(p)))
    }
}

/// Planes whose normals are this close to (anti)parallel do not intersect.
pub const PARALLEL_TOL: f64 = 1e-6;

/// Intersection of two planes: direction `n1 x n2` normalized, and the
/// point of the line closest to the origin.
pub fn plane_intersection(p1: &Plane, p2: &Plane) -> Result<Line3> {
    let c = p1.normal.dot(p2.normal);
    if c.abs() >= 1.0 - PARALLEL_TOL {
        return Err(Error::ParallelPlanes(p1.id, p2.id));
    }
    let direction = p1.normal.cross(p2.normal).normalized();
    let k = 1.0 - c * c;
    let a = (p1.offset - c * p2.offset) / k;
    let b = (p2.offset - c * p1.offset) / k;
    Ok(Line3 { point: p1.normal * a + p2.normal * b, direction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedCrease {
    /// Ascending plane-id pair.
    pub planes: [u32; 2],
    pub endpoints: [Vec3; 2],
    pub fragments: usize,
}

impl MergedCrease {
    pub fn length(&self) -> f64 {
        self.endpoints[0].dist(self.endpoints[1])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WireframeModel {
    pub planes: PlaneSet,
    pub lines: Vec<LabeledLine>,
    pub creases: Vec<MergedCrease>,
    pub warnings: Vec<String>,
}

impl WireframeModel {
    /// Axis-aligned bounds of the merged creases, as a size readout.
    pub fn extents(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.creases.iter().flat_map(|c| c.endpoints);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)), Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)))
        }))
    }
}

/// Replaces the crease fragments of each plane pair with one segment on the
/// pair's intersection line spanning the extremal endpoint projections.
/// Pairs whose planes are parallel keep only their fragments and add a
/// warning.
pub fn merge_creases(mut model: WireframeModel) -> WireframeModel {
    let mut groups: BTreeMap<[u32; 2], Vec<[Vec3; 2]>> = BTreeMap::new();
    for l in &model.lines {
        if let (LineLabel::Crease, Some(pair), Some(ends)) = (l.label, l.planes, l.endpoints) {
            groups.entry(pair).or_default().push(ends);
        }
    }
    model.creases.clear();
    for (pair, frags) in groups {
        let (Some(p1), Some(p2)) = (model.planes.get(pair[0]), model.planes.get(pair[1])) else {
            model.warnings.push(format!("crease between planes {} and {} references an unknown plane", pair[0], pair[1]));
            continue;
        };
        let line = match plane_intersection(p1, p2) {
            Ok(l) => l,
            Err(e) => {
                model.warnings.push(format!("{} crease fragments left unmerged: {e}", frags.len()));
                continue;
            }
        };
        let (lo, hi) = frags
            .iter()
            .flatten()
            .map(|&p| line.parameter(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
        model.creases.push(MergedCrease { planes: pair, endpoints: [line.at(lo), line.at(hi)], fragments: frags.len() });
    }
    model
}

/// One posed frame with its 2D line detections and, optionally, external
/// plane labels that replace plane detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub frame: CameraFrame,
    pub lines: Vec<Quadruplet>,
    pub plane_labels: Option<Grid>,
}

/// Plane ids of `frame` after merging into `global`, as a label grid.
fn process_frame(global: &mut PlaneSet, input: &FrameInput, cfg: &FusionConfig) -> Result<Grid> {
    let detected = match &input.plane_labels {
        Some(l) => planes_from_labels(&input.frame, l, cfg)?,
        None => detect_planes(&input.frame, cfg)?.0,
    };
    let mut remap = BTreeMap::new();
    for d in &detected {
        let out = merge_plane(global, d, &input.frame, cfg);
        remap.insert(d.plane.id, out.id);
    }
    let (w, h) = input.frame.size();
    let mut data = alloc::vec![0.0; w * h];
    for d in &detected {
        let id = remap[&d.plane.id] as f64;
        for &i in &d.pixels {
            data[i] = id;
        }
    }
    Grid::from_f64(alloc::vec![h, w], crate::Role::PlaneLabels, data)
}

/// Runs plane merging and line labeling over frames in order, then merges
/// creases. Frames with a non-rigid pose are skipped with a warning.
pub fn fuse_sequence(frames: &[FrameInput], cfg: &FusionConfig) -> Result<WireframeModel> {
    cfg.validate()?;
    let mut model = WireframeModel::default();
    for (k, input) in frames.iter().enumerate() {
        if !input.frame.pose.is_orthonormal() {
            model.warnings.push(format!("frame {k} skipped: pose is not a rigid transform"));
            continue;
        }
        let labels = process_frame(&mut model.planes, input, cfg)?;
        for line in &input.lines {
            model.lines.push(classify_line(line, &labels, &input.frame, cfg)?);
        }
    }
    Ok(merge_creases(model))
}
