use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::FusionConfig;
use crate::assemble::Quadruplet;
use crate::math::{median, round};
use crate::{CameraFrame, Error, Grid, Point2, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineLabel {
    Crease,
    Occlusion,
    Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledLine {
    pub segment: Quadruplet,
    /// Back-projected endpoints, when depth is available at both.
    pub endpoints: Option<[Vec3; 2]>,
    pub label: LineLabel,
    /// The two adjacent planes, ascending; creases only.
    pub planes: Option<[u32; 2]>,
    /// Fraction of band samples that landed on a labeled pixel.
    pub confidence: f64,
    /// No labeled samples were found; the label is a default.
    pub low_confidence: bool,
}

struct Side {
    depths: Vec<f64>,
}

/// Labels a 2D line from the plane ids in a band on either side of it.
///
/// Samples run along the middle 80% of the line at roughly one per pixel and
/// perpendicular offsets `1..=band_halfwidth` on both sides. If one plane id
/// holds at least `peak_dominance` of the labeled samples the line is a
/// texture edge. If the two most frequent ids are within `peak_similarity`
/// of each other (relative to the larger) and the per-side median depths
/// differ by at most `depth_disparity` it is a crease between them.
/// Everything else is an occlusion boundary.
pub fn classify_line(line: &Quadruplet, labels: &Grid, frame: &CameraFrame, cfg: &FusionConfig) -> Result<LabeledLine> {
    let (w, h) = frame.size();
    if labels.dims() != [h, w] {
        return Err(Error::shape("classify_line", alloc::format!("labels {:?} for a {w}x{h} frame", labels.dims())));
    }
    // Canonical endpoint order makes the result independent of line direction.
    let (a, b) = if (line.j1.x, line.j1.y) <= (line.j2.x, line.j2.y) { (line.j1, line.j2) } else { (line.j2, line.j1) };
    let len = a.dist(b);
    let dir = if len > 0.0 { (b - a) / len } else { Point2::new(1.0, 0.0) };
    let normal = Point2::new(-dir.y, dir.x);
    let steps = libm::ceil(0.8 * len).max(2.0) as usize;

    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    let mut sides = [Side { depths: Vec::new() }, Side { depths: Vec::new() }];
    let mut attempted = 0usize;
    for s in 0..steps {
        let t = 0.1 + 0.8 * s as f64 / (steps - 1) as f64;
        let p = a + (b - a) * t;
        for k in 1..=cfg.band_halfwidth {
            for (side, sign) in [(0usize, 1.0), (1, -1.0)] {
                attempted += 1;
                let q = p + normal * (sign * k as f64);
                let (c, r) = (round(q.x), round(q.y));
                if !(c >= 0.0 && r >= 0.0 && (c as usize) < w && (r as usize) < h) {
                    continue;
                }
                let (c, r) = (c as usize, r as usize);
                let id = labels.at(r, c, 0);
                let z = frame.depth_at(c, r);
                if !(id >= 1.0) || !(z > 0.0) {
                    continue;
                }
                *hist.entry(id as u32).or_default() += 1;
                sides[side].depths.push(z);
            }
        }
    }
    let endpoints = match (frame.depth_interpolated(line.j1), frame.depth_interpolated(line.j2)) {
        (Some(z1), Some(z2)) => Some([frame.back_project(line.j1, z1), frame.back_project(line.j2, z2)]),
        _ => None,
    };
    let labeled: usize = hist.values().sum();
    let mut out = LabeledLine {
        segment: *line,
        endpoints,
        label: LineLabel::Occlusion,
        planes: None,
        confidence: if attempted == 0 { 0.0 } else { labeled as f64 / attempted as f64 },
        low_confidence: labeled == 0,
    };
    if labeled == 0 {
        return Ok(out);
    }
    let mut ranked: Vec<(u32, usize)> = hist.into_iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let (id1, c1) = ranked[0];
    if c1 as f64 >= cfg.peak_dominance * labeled as f64 {
        out.label = LineLabel::Texture;
        return Ok(out);
    }
    let Some(&(id2, c2)) = ranked.get(1) else { return Ok(out) };
    let similar = (c1 - c2) as f64 / c1 as f64 <= cfg.peak_similarity;
    let [s0, s1] = &mut sides;
    if similar && !s0.depths.is_empty() && !s1.depths.is_empty() {
        let disparity = (median(&mut s0.depths) - median(&mut s1.depths)).abs();
        if disparity <= cfg.depth_disparity {
            out.label = LineLabel::Crease;
            out.planes = Some([id1.min(id2), id1.max(id2)]);
        }
    }
    Ok(out)
}
