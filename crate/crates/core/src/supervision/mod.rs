//! Ground-truth map synthesis, the multi-task map losses, and annotation flips.

use alloc::format;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::decode::{DecodeMaps, BELOW_ONE};
use crate::math::{exp, floor, ln};
use crate::{Annotation, Error, Grid, Point2, Result, Role};

/// Probability clamp for every log term.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_j: f64,
    pub lambda_c: f64,
    pub lambda_o: f64,
    pub lambda_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_j: 1.0, lambda_c: 1.0, lambda_o: 1.0, lambda_s: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_j", self.lambda_j), ("lambda_c", self.lambda_c), ("lambda_o", self.lambda_o), ("lambda_s", self.lambda_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("loss weights", format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 4.0 }
    }
}

impl FocalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::invalid("focal params", format!("alpha {} and beta {} must be positive", self.alpha, self.beta)));
        }
        Ok(())
    }
}

/// Training targets for one image, on the heatmap grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GtMaps {
    pub junction_heat: Grid,
    pub junction_offset: Grid,
    pub center_heat: Grid,
    pub center_offset: Grid,
    pub shift: Grid,
    /// 1 where `junction_offset` carries a target.
    pub junction_mask: Grid,
    /// 1 where `center_offset` and `shift` carry a target.
    pub center_mask: Grid,
}

impl GtMaps {
    /// The maps a perfect learner would emit.
    pub fn to_decode_maps(&self) -> DecodeMaps {
        DecodeMaps {
            junction_heat: self.junction_heat.clone(),
            junction_offset: self.junction_offset.clone(),
            center_heat: self.center_heat.clone(),
            center_offset: self.center_offset.clone(),
            shift: self.shift.clone(),
        }
    }

    pub fn rows_cols(&self) -> (usize, usize) {
        (self.junction_heat.dims()[0], self.junction_heat.dims()[1])
    }
}

/// Heatmap extent for an image: `ceil(size / stride)` per axis.
pub fn heatmap_size(ann: &Annotation, stride: f64) -> (usize, usize) {
    let cells = |px: u32| libm::ceil(px as f64 / stride) as usize;
    (cells(ann.height()), cells(ann.width()))
}

/// Parameter interval of `a + t (b - a)`, t in [0, 1], inside the closed box
/// `[x0, x1] x [y0, y1]`.
fn clip_segment(a: Point2, b: Point2, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x - x0), (d.x, x1 - a.x), (-d.y, a.y - y0), (d.y, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn cell_and_fraction(v: f64, cells: usize) -> Option<(usize, f64)> {
    let c = floor(v);
    if !(c >= 0.0 && (c as usize) < cells) {
        return None;
    }
    Some((c as usize, (v - c).clamp(0.0, BELOW_ONE)))
}

/// Renders junction, center, offset and shift targets for one annotation.
///
/// In heatmap coordinates (pixels / `stride`) cell `(col, row)` covers
/// `[col, col + 1] x [row, row + 1]`. A line adds
/// `exp(-t^2 / (2 sigma^2))` to every cell it crosses, where `t` is the
/// distance along the line from its midpoint to the nearest crossing point;
/// overlapping lines combine by maximum. Junctions or midpoints outside the
/// grid produce no target.
pub fn make_gt_maps(ann: &Annotation, stride: f64, sigma: f64) -> Result<GtMaps> {
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(Error::invalid("make_gt_maps", format!("stride {stride} must be positive")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("make_gt_maps", format!("sigma {sigma} must be positive")));
    }
    ann.validate()?;
    let (rows, cols) = heatmap_size(ann, stride);
    let n = rows * cols;
    let mut jheat = vec![0.0; n];
    let mut joff = vec![0.0; 2 * n];
    let mut jmask = vec![0.0; n];
    let mut cheat = vec![0.0f64; n];
    let mut coff = vec![0.0; 2 * n];
    let mut shift = vec![0.0; 2 * n];
    let mut cmask = vec![0.0; n];

    for &j in &ann.junctions {
        let p = j / stride;
        if let (Some((c, fx)), Some((r, fy))) = (cell_and_fraction(p.x, cols), cell_and_fraction(p.y, rows)) {
            let i = r * cols + c;
            jheat[i] = 1.0;
            jmask[i] = 1.0;
            joff[2 * i] = fx;
            joff[2 * i + 1] = fy;
        }
    }

    let two_s2 = 2.0 * sigma * sigma;
    for (a, b) in ann.segments() {
        let (a, b) = (a / stride, b / stride);
        let len = a.dist(b);
        let lo = |u: f64, v: f64, hi: usize| (floor(u.min(v)).max(0.0) as usize).min(hi);
        let hi = |u: f64, v: f64, hi: usize| (floor(u.max(v)).max(0.0) as usize).min(hi);
        let (c0, c1) = (lo(a.x, b.x, cols - 1), hi(a.x, b.x, cols - 1));
        let (r0, r1) = (lo(a.y, b.y, rows - 1), hi(a.y, b.y, rows - 1));
        for r in r0..=r1 {
            for c in c0..=c1 {
                let Some((t0, t1)) = clip_segment(a, b, c as f64, c as f64 + 1.0, r as f64, r as f64 + 1.0) else {
                    continue;
                };
                let t = if (t0..=t1).contains(&0.5) { 0.0 } else { (t0 - 0.5).abs().min((t1 - 0.5).abs()) * len };
                let v = exp(-t * t / two_s2);
                let i = r * cols + c;
                cheat[i] = cheat[i].max(v);
            }
        }
        let m = (a + b) * 0.5;
        if let (Some((c, fx)), Some((r, fy))) = (cell_and_fraction(m.x, cols), cell_and_fraction(m.y, rows)) {
            let i = r * cols + c;
            cheat[i] = 1.0;
            // The first line through a cell keeps its regression targets.
            if cmask[i] == 0.0 {
                cmask[i] = 1.0;
                coff[2 * i] = fx;
                coff[2 * i + 1] = fy;
                let s = ((b - a) * 0.5).canonical_direction();
                shift[2 * i] = s.x;
                shift[2 * i + 1] = s.y;
            }
        }
    }

    let d2 = vec![rows, cols];
    let d3 = vec![rows, cols, 2];
    Ok(GtMaps {
        junction_heat: Grid::from_f64(d2.clone(), Role::JunctionHeat, jheat)?,
        junction_offset: Grid::from_f64(d3.clone(), Role::JunctionOffset, joff)?,
        center_heat: Grid::from_f64(d2.clone(), Role::CenterHeat, cheat)?,
        center_offset: Grid::from_f64(d3.clone(), Role::CenterOffset, coff)?,
        shift: Grid::from_f64(d3, Role::ShiftVec, shift)?,
        junction_mask: Grid::from_f64(d2.clone(), Role::Generic, jmask)?,
        center_mask: Grid::from_f64(d2, Role::Generic, cmask)?,
    })
}

fn same_dims(op: &'static str, a: &Grid, b: &Grid) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(op, format!("dims {:?} and {:?} differ", a.dims(), b.dims())));
    }
    Ok(())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Mean binary cross-entropy over every heatmap pixel.
pub fn bce_junction_loss(pred: &Grid, gt: &Grid) -> Result<f64> {
    same_dims("bce_junction_loss", pred, gt)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = (0..pred.len())
        .map(|i| {
            let (p, y) = (clamp_prob(pred.value(i)), gt.value(i));
            -(y * ln(p) + (1.0 - y) * ln(1.0 - p))
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Penalty-reduced focal loss averaged over every heatmap pixel. Pixels with
/// target exactly 1 are positives; the rest are down-weighted negatives.
pub fn focal_center_loss(pred: &Grid, gt: &Grid, params: FocalParams) -> Result<f64> {
    same_dims("focal_center_loss", pred, gt)?;
    params.validate()?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let FocalParams { alpha, beta } = params;
    let total: f64 = (0..pred.len())
        .map(|i| {
            let (p, y) = (clamp_prob(pred.value(i)), gt.value(i));
            if y == 1.0 {
                libm::pow(1.0 - p, alpha) * ln(p)
            } else {
                libm::pow(1.0 - y, beta) * libm::pow(p, alpha) * ln(1.0 - p)
            }
        })
        .sum();
    Ok(-total / pred.len() as f64)
}

/// Mean absolute error over the channels of cells where `mask` is nonzero.
pub fn l1_regression_loss(pred: &Grid, gt: &Grid, mask: &Grid) -> Result<f64> {
    same_dims("l1_regression_loss", pred, gt)?;
    if mask.dims().len() < 2 || pred.dims()[..2] != mask.dims()[..2] || mask.channels() != 1 {
        return Err(Error::shape("l1_regression_loss", format!("mask dims {:?} do not match {:?}", mask.dims(), pred.dims())));
    }
    let ch = pred.channels();
    let (mut total, mut count) = (0.0, 0usize);
    for cell in (0..mask.len()).filter(|&i| mask.value(i) != 0.0) {
        for k in cell * ch..(cell + 1) * ch {
            total += (pred.value(k) - gt.value(k)).abs();
        }
        count += ch;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// The four map terms, already reduced to scalars.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub junction: f64,
    pub center: f64,
    /// Junction plus center offset L1.
    pub offset: f64,
    pub shift: f64,
}

/// Evaluates every map term of a prediction against its targets.
pub fn map_losses(pred: &DecodeMaps, gt: &GtMaps, focal: FocalParams) -> Result<LossParts> {
    Ok(LossParts {
        junction: bce_junction_loss(&pred.junction_heat, &gt.junction_heat)?,
        center: focal_center_loss(&pred.center_heat, &gt.center_heat, focal)?,
        offset: l1_regression_loss(&pred.junction_offset, &gt.junction_offset, &gt.junction_mask)?
            + l1_regression_loss(&pred.center_offset, &gt.center_offset, &gt.center_mask)?,
        shift: l1_regression_loss(&pred.shift, &gt.shift, &gt.center_mask)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub parts: LossParts,
    /// Weighted sum of the map terms.
    pub multitask: f64,
    /// Line-classification cross-entropy.
    pub relation: f64,
    pub total: f64,
}

/// Mean binary cross-entropy of line scores (probabilities) against labels;
/// 0 for no lines.
pub fn line_bce(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("line_bce", format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = clamp_prob(s);
            -(y * ln(p) + (1.0 - y) * ln(1.0 - p))
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// `λ_j L_j + λ_c L_c + λ_o L_o + λ_s L_s` plus the line term.
pub fn total_loss(parts: LossParts, weights: LossWeights, line_scores: &[f64], line_labels: &[f64]) -> Result<LossBreakdown> {
    weights.validate()?;
    let named = [("junction", parts.junction), ("center", parts.center), ("offset", parts.offset), ("shift", parts.shift)];
    if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { term: (*name).into(), step: None });
    }
    if line_scores.iter().chain(line_labels).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { term: "line scores".into(), step: None });
    }
    let multitask = weights.lambda_j * parts.junction
        + weights.lambda_c * parts.center
        + weights.lambda_o * parts.offset
        + weights.lambda_s * parts.shift;
    let relation = line_bce(line_scores, line_labels)?;
    Ok(LossBreakdown { parts, multitask, relation, total: multitask + relation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    Horizontal,
    Vertical,
    Central,
}

/// Mirrors junctions with `x' = W - x` and/or `y' = H - y`, treating
/// coordinates as continuous positions between the image edges 0 and W.
pub fn flip_annotation(ann: &Annotation, mode: FlipMode) -> Annotation {
    let (w, h) = (ann.width() as f64, ann.height() as f64);
    let (fx, fy) = match mode {
        FlipMode::Horizontal => (true, false),
        FlipMode::Vertical => (false, true),
        FlipMode::Central => (true, true),
    };
    let junctions = ann
        .junctions
        .iter()
        .map(|p| Point2::new(if fx { w - p.x } else { p.x }, if fy { h - p.y } else { p.y }))
        .collect();
    Annotation { size: ann.size, junctions, lines: ann.lines.clone() }
}
