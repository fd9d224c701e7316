//! Keypoint decoding from the learner's heatmaps, offset maps and shift map.
//!
//! Heatmap cell `(col, row)` sits at heatmap coordinate `(col, row)`; a
//! keypoint's image position is `(cell + offset) * stride`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Point2, Result, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointKind {
    Junction,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub pos: Point2,
    pub score: f64,
    pub kind: KeypointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub junction_threshold: f64,
    pub max_junctions: usize,
    pub nms_window: usize,
    pub output_stride: f64,
    pub center_threshold: f64,
    pub max_centers: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            junction_threshold: 0.008,
            max_junctions: 300,
            nms_window: 3,
            output_stride: 4.0,
            center_threshold: 0.008,
            max_centers: 300,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("junction_threshold", self.junction_threshold), ("center_threshold", self.center_threshold)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("decode config", format!("{name} {t} outside [0, 1]")));
            }
        }
        if !(self.output_stride >= 1.0) {
            return Err(Error::invalid("decode config", format!("output_stride {} < 1", self.output_stride)));
        }
        if self.nms_window < 3 || self.nms_window.is_multiple_of(2) {
            return Err(Error::invalid("decode config", format!("nms_window {} must be odd and >= 3", self.nms_window)));
        }
        Ok(())
    }
}

fn heatmap_dims(heat: &Grid, op: &'static str) -> Result<(usize, usize)> {
    match heat.dims() {
        &[rows, cols] => Ok((rows, cols)),
        d => Err(Error::shape(op, format!("expected a 2D heatmap, got dims {d:?}"))),
    }
}

/// Local maxima of a 2D heatmap, in heatmap cells, best first.
///
/// A cell survives when its value is at least `threshold` and no other cell
/// of its `window x window` neighbourhood (clipped at the border) is larger.
/// Equal-valued cells that reach each other through such neighbourhoods form
/// a plateau; a plateau yields one peak, its lowest row-major cell, and only
/// if no member has a larger neighbour.
pub fn nms_local_maxima(
    heat: &Grid,
    window: usize,
    threshold: f64,
    max_k: usize,
    kind: KeypointKind,
) -> Result<Vec<Keypoint>> {
    let (rows, cols) = heatmap_dims(heat, "nms_local_maxima")?;
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid("nms window", format!("{window} must be odd")));
    }
    let r = window / 2;
    let span = |i: usize| {
        let (row, col) = (i / cols, i % cols);
        let rs = row.saturating_sub(r)..=(row + r).min(rows - 1);
        let cs = col.saturating_sub(r)..=(col + r).min(cols - 1);
        rs.flat_map(move |qr| cs.clone().map(move |qc| qr * cols + qc))
    };
    let mut seen = alloc::vec![false; rows * cols];
    let mut stack = Vec::new();
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for idx in 0..rows * cols {
        let v = heat.value(idx);
        if seen[idx] || !(v >= threshold) {
            continue;
        }
        // Row-major order reaches every plateau through its lowest cell.
        seen[idx] = true;
        stack.push(idx);
        let mut dominated = false;
        while let Some(i) = stack.pop() {
            for q in span(i) {
                let w = heat.value(q);
                if w > v {
                    dominated = true;
                } else if w == v && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if !dominated {
            peaks.push((idx, v));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(max_k);
    Ok(peaks
        .into_iter()
        .map(|(idx, score)| Keypoint {
            pos: Point2::new((idx % cols) as f64, (idx / cols) as f64),
            score,
            kind,
        })
        .collect())
}

fn cell_of(kp: &Keypoint, rows: usize, cols: usize, op: &'static str) -> Result<(usize, usize)> {
    let (c, r) = (libm::round(kp.pos.x), libm::round(kp.pos.y));
    if !(c >= 0.0 && r >= 0.0 && (c as usize) < cols && (r as usize) < rows) {
        return Err(Error::Index { op, detail: format!("cell {:?} outside {rows}x{cols} grid", kp.pos) });
    }
    Ok((r as usize, c as usize))
}

fn two_channel_dims(g: &Grid, op: &'static str) -> Result<(usize, usize)> {
    match g.dims() {
        &[rows, cols, 2] => Ok((rows, cols)),
        d => Err(Error::shape(op, format!("expected dims [rows, cols, 2], got {d:?}"))),
    }
}

/// Largest f64 strictly below 1.
pub(crate) const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// `(cell + offset) * stride` kept strictly inside the cell's pixel span
/// even where the sum rounds up to the next cell.
fn cell_to_pixel(cell: usize, offset: f64, stride: f64) -> f64 {
    let cell = cell as f64;
    let p = (cell + offset.clamp(0.0, BELOW_ONE)) * stride;
    let end = (cell + 1.0) * stride;
    if p < end {
        p
    } else {
        end.next_down()
    }
}

/// Moves heatmap-cell keypoints to image pixels using the offset map.
pub fn apply_offsets(kps: &[Keypoint], offset: &Grid, stride: f64) -> Result<Vec<Keypoint>> {
    let (rows, cols) = two_channel_dims(offset, "apply_offsets")?;
    kps.iter()
        .map(|kp| {
            let (r, c) = cell_of(kp, rows, cols, "apply_offsets")?;
            Ok(Keypoint {
                pos: Point2::new(cell_to_pixel(c, offset.at(r, c, 0), stride), cell_to_pixel(r, offset.at(r, c, 1), stride)),
                ..*kp
            })
        })
        .collect()
}

/// Shift vectors in image pixels at each center's cell, canonicalized to the right.
pub fn read_shift(centers: &[Keypoint], shift: &Grid, stride: f64) -> Result<Vec<Point2>> {
    let (rows, cols) = two_channel_dims(shift, "read_shift")?;
    centers
        .iter()
        .map(|kp| {
            let (r, c) = cell_of(kp, rows, cols, "read_shift")?;
            Ok((Point2::new(shift.at(r, c, 0), shift.at(r, c, 1)) * stride).canonical_direction())
        })
        .collect()
}

/// The five per-image output maps of the learner.
#[derive(Debug, Clone)]
pub struct DecodeMaps {
    pub junction_heat: Grid,
    pub junction_offset: Grid,
    pub center_heat: Grid,
    pub center_offset: Grid,
    pub shift: Grid,
}

impl DecodeMaps {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = heatmap_dims(&self.junction_heat, "decode")?;
        let expect = [
            (&self.junction_heat, Role::JunctionHeat),
            (&self.center_heat, Role::CenterHeat),
            (&self.junction_offset, Role::JunctionOffset),
            (&self.center_offset, Role::CenterOffset),
            (&self.shift, Role::ShiftVec),
        ];
        for (g, role) in expect {
            if g.role() != role && g.role() != Role::Generic {
                return Err(Error::invalid("decode input", format!("expected a {role:?} grid, got {:?}", g.role())));
            }
            if g.dims()[..2] != [rows, cols] {
                return Err(Error::shape("decode", format!("{role:?} dims {:?} differ from heatmap {rows}x{cols}", g.dims())));
            }
        }
        Ok(())
    }
}

/// Junction and center candidates with the shift read at each center.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Decoded {
    pub junctions: Vec<Keypoint>,
    pub centers: Vec<Keypoint>,
    pub shifts: Vec<Point2>,
}

pub fn decode(maps: &DecodeMaps, cfg: &DecodeConfig) -> Result<Decoded> {
    cfg.validate()?;
    maps.validate()?;
    let j = nms_local_maxima(&maps.junction_heat, cfg.nms_window, cfg.junction_threshold, cfg.max_junctions, KeypointKind::Junction)?;
    let c = nms_local_maxima(&maps.center_heat, cfg.nms_window, cfg.center_threshold, cfg.max_centers, KeypointKind::Center)?;
    let shifts = read_shift(&c, &maps.shift, cfg.output_stride)?;
    Ok(Decoded {
        junctions: apply_offsets(&j, &maps.junction_offset, cfg.output_stride)?,
        centers: apply_offsets(&c, &maps.center_offset, cfg.output_stride)?,
        shifts,
    })
}
