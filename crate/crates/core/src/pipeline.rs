//! The post-backbone detection pipeline: decode, assemble, pool, score.
//!
//! Each stage is exposed separately so callers can time or inspect it;
//! [`detect`] chains them. Stage failures are wrapped in
//! [`Error::Stage`] carrying the stage name.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assemble::{assemble, AssembleConfig, CandidateGraph, Quadruplet};
use crate::decode::{decode, DecodeConfig, DecodeMaps, Decoded};
use crate::gnn::{GnnModel, GraphInput};
use crate::linalg::Real;
use crate::loipool::{loi_pool, LineFeatures, PoolConfig};
use crate::{Error, Grid, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub decode: DecodeConfig,
    pub assemble: AssembleConfig,
    pub pool: PoolConfig,
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        self.decode.validate()?;
        self.assemble.validate()?;
        self.pool.validate()
    }
}

pub fn decode_stage(maps: &DecodeMaps, cfg: &DecodeConfig) -> Result<Decoded> {
    decode(maps, cfg).map_err(|e| e.in_stage("decode"))
}

pub fn assemble_stage(decoded: &Decoded, cfg: &AssembleConfig) -> Result<CandidateGraph> {
    assemble(&decoded.centers, &decoded.shifts, &decoded.junctions, cfg).map(|(g, _)| g).map_err(|e| e.in_stage("assemble"))
}

/// Pools every graph vertex. Vertices are in image pixels; the feature map
/// shares the heatmap grid, so coordinates are divided by `stride`.
pub fn pool_stage(features: &Grid, graph: &CandidateGraph, cfg: &PoolConfig, stride: f64) -> Result<Vec<LineFeatures>> {
    let inv = 1.0 / stride;
    graph.vertices.iter().map(|q| loi_pool(features, &q.scaled(inv), cfg)).collect::<Result<_>>().map_err(|e| e.in_stage("pool"))
}

/// Scores the graph and returns its lines sorted by score, highest first.
/// Equal scores keep graph order.
pub fn score_stage<T: Real>(model: &GnnModel<T>, graph: &CandidateGraph, features: &[LineFeatures]) -> Result<Vec<Quadruplet>> {
    let run = || -> Result<Vec<Quadruplet>> {
        let scores = model.forward(&GraphInput::new(features, &graph.adjacency)?)?;
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { term: format!("line {i} score"), step: None });
        }
        let mut lines: Vec<Quadruplet> = graph.vertices.iter().zip(scores).map(|(q, s)| Quadruplet { score: s, ..*q }).collect();
        lines.sort_by(|a, b| b.score.total_cmp(&a.score));
        Ok(lines)
    };
    run().map_err(|e| e.in_stage("score"))
}

/// Runs all four stages on one image.
pub fn detect<T: Real>(maps: &DecodeMaps, features: &Grid, model: &GnnModel<T>, cfg: &DetectConfig) -> Result<Vec<Quadruplet>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let heat = maps.junction_heat.dims();
    if features.dims().len() != 3 || features.dims()[..2] != heat[..2] {
        return Err(Error::Shape {
            op: "detect",
            detail: format!("features {:?} must share the heatmap grid {:?}", features.dims(), heat),
        }
        .in_stage("pool"));
    }
    let decoded = decode_stage(maps, &cfg.decode)?;
    let graph = assemble_stage(&decoded, &cfg.assemble)?;
    let pooled = pool_stage(features, &graph, &cfg.pool, cfg.decode.output_stride)?;
    score_stage(model, &graph, &pooled)
}
