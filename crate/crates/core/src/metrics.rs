//! Structural average precision over scored line segments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Annotation, Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub endpoints: [Point2; 2],
    pub score: f64,
}

impl ScoredSegment {
    pub fn new(a: Point2, b: Point2, score: f64) -> Self {
        Self { endpoints: [a, b], score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SapConfig {
    /// Bound on the summed squared endpoint distances, in evaluation-grid units.
    pub threshold: f64,
    /// Evaluation grid `[width, height]`.
    pub resolution: [u32; 2],
}

impl Default for SapConfig {
    fn default() -> Self {
        Self { threshold: 10.0, resolution: [128, 128] }
    }
}

impl SapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::invalid("sap config", format!("threshold {} must be positive", self.threshold)));
        }
        if self.resolution.contains(&0) {
            return Err(Error::invalid("sap config", format!("resolution {:?} must be positive", self.resolution)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score: f64,
    pub image: usize,
    pub true_positive: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SapReport {
    pub ap: f64,
    pub threshold: f64,
    pub resolution: [u32; 2],
    pub gt_lines: usize,
    pub predictions: usize,
    /// One point per prediction in ranking order.
    pub curve: Vec<PrPoint>,
}

/// Summed squared endpoint distance under the better endpoint pairing.
pub fn segment_distance(p: &[Point2; 2], g: &[Point2; 2]) -> f64 {
    let straight = p[0].dist2(g[0]) + p[1].dist2(g[1]);
    let swapped = p[0].dist2(g[1]) + p[1].dist2(g[0]);
    straight.min(swapped)
}

/// sAP of per-image predictions against per-image ground-truth segments,
/// both already in evaluation coordinates.
///
/// Predictions are ranked by descending score across all images (ties by
/// image, then list position). A prediction is a true positive when the
/// nearest ground-truth line of its image (lowest index on ties) is within
/// the threshold and not yet claimed; a prediction whose nearest line was
/// already claimed is a false positive even if another line is in range. AP sums recall increments weighted by the precision
/// envelope `max_{j >= k} precision_j`.
pub fn sap(preds: &[Vec<ScoredSegment>], gts: &[Vec<[Point2; 2]>], cfg: &SapConfig) -> Result<SapReport> {
    cfg.validate()?;
    if preds.len() != gts.len() {
        return Err(Error::shape("sap", format!("{} prediction images for {} ground-truth images", preds.len(), gts.len())));
    }
    let mut order: Vec<(usize, usize)> =
        preds.iter().enumerate().flat_map(|(i, ps)| (0..ps.len()).map(move |k| (i, k))).collect();
    if let Some(&(i, k)) = order.iter().find(|&&(i, k)| preds[i][k].score.is_nan()) {
        return Err(Error::invalid("sap", format!("prediction {k} of image {i} has a NaN score")));
    }
    // Stable sort keeps (image, index) order among equal scores.
    order.sort_by(|a, b| preds[b.0][b.1].score.total_cmp(&preds[a.0][a.1].score));

    let gt_lines: usize = gts.iter().map(Vec::len).sum();
    let mut used: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut curve = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &(i, k)) in order.iter().enumerate() {
        let p = &preds[i][k];
        let nearest = gts[i]
            .iter()
            .enumerate()
            .map(|(g, seg)| (g, segment_distance(&p.endpoints, seg)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let hit = match nearest {
            Some((g, d)) if d <= cfg.threshold && !used[i][g] => {
                used[i][g] = true;
                tp += 1;
                true
            }
            _ => false,
        };
        curve.push(PrPoint {
            score: p.score,
            image: i,
            true_positive: hit,
            precision: tp as f64 / (rank + 1) as f64,
            recall: if gt_lines == 0 { 0.0 } else { tp as f64 / gt_lines as f64 },
        });
    }

    let mut ap = 0.0;
    let mut envelope = 0.0f64;
    for k in (0..curve.len()).rev() {
        envelope = envelope.max(curve[k].precision);
        let prev = if k == 0 { 0.0 } else { curve[k - 1].recall };
        ap += (curve[k].recall - prev) * envelope;
    }
    Ok(SapReport { ap, threshold: cfg.threshold, resolution: cfg.resolution, gt_lines, predictions: curve.len(), curve })
}

/// Rescales image-pixel segments to the evaluation grid, per axis.
pub fn scale_to_eval(segments: &[ScoredSegment], image_size: [u32; 2], resolution: [u32; 2]) -> Result<Vec<ScoredSegment>> {
    let s = eval_scale(image_size, resolution)?;
    Ok(segments
        .iter()
        .map(|seg| ScoredSegment { endpoints: seg.endpoints.map(|p| Point2::new(p.x * s.x, p.y * s.y)), score: seg.score })
        .collect())
}

fn eval_scale(image_size: [u32; 2], resolution: [u32; 2]) -> Result<Point2> {
    if image_size.contains(&0) {
        return Err(Error::invalid("scale_to_eval", format!("image size {image_size:?} must be positive")));
    }
    if image_size == resolution {
        return Ok(Point2::new(1.0, 1.0));
    }
    Ok(Point2::new(resolution[0] as f64 / image_size[0] as f64, resolution[1] as f64 / image_size[1] as f64))
}

/// sAP of image-pixel predictions against annotations, rescaling both to the
/// evaluation grid using each annotation's image size.
pub fn sap_annotations(preds: &[Vec<ScoredSegment>], anns: &[Annotation], cfg: &SapConfig) -> Result<SapReport> {
    if preds.len() != anns.len() {
        return Err(Error::shape("sap", format!("{} prediction images for {} annotations", preds.len(), anns.len())));
    }
    let mut scaled = Vec::with_capacity(preds.len());
    let mut gts = Vec::with_capacity(anns.len());
    for (p, a) in preds.iter().zip(anns) {
        let s = eval_scale(a.size, cfg.resolution)?;
        scaled.push(scale_to_eval(p, a.size, cfg.resolution)?);
        gts.push(a.segments().map(|(u, v)| [Point2::new(u.x * s.x, u.y * s.y), Point2::new(v.x * s.x, v.y * s.y)]).collect());
    }
    sap(&scaled, &gts, cfg)
}
