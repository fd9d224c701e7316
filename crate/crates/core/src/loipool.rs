//! Line-of-interest pooling: per-line semantic features sampled from the
//! backbone feature map, plus the geometric center/shift descriptor.
//!
//! All coordinates here are feature-map cells (image pixels divided by the
//! output stride). Feature grids are `[rows, cols, channels]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, GridData, Point2, Quadruplet, Result, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub n_points: usize,
    pub pool_stride: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self { n_points: 32, pool_stride: 4 }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 || self.pool_stride == 0 || !self.n_points.is_multiple_of(self.pool_stride) {
            return Err(Error::invalid(
                "pool config",
                format!("n_points {} must be >= 2 and divisible by pool_stride {}", self.n_points, self.pool_stride),
            ));
        }
        Ok(())
    }

    /// Length of the pooled semantic vector for `channels` feature channels.
    pub fn semantic_len(&self, channels: usize) -> usize {
        self.n_points / self.pool_stride * channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineFeatures {
    /// Group-major: group `g` occupies `[g * D, (g + 1) * D)`.
    pub semantic: Vec<f64>,
    /// `(center.x, center.y, shift.x, shift.y)` in feature-map cells.
    pub geometric: [f64; 4],
}

/// `n` evenly spaced points from `j1` to `j2`, both endpoints included.
pub fn sample_points(quad: &Quadruplet, n: usize) -> Vec<Point2> {
    let d = quad.j2 - quad.j1;
    let denom = (n.max(2) - 1) as f64;
    (0..n).map(|i| quad.j1 + d * (i as f64 / denom)).collect()
}

fn feature_dims(features: &Grid) -> Result<(usize, usize, usize)> {
    match *features.dims() {
        [rows, cols, ch] => Ok((rows, cols, ch)),
        [rows, cols] => Ok((rows, cols, 1)),
        ref d => Err(Error::shape("bilinear", format!("expected [rows, cols, channels], got {d:?}"))),
    }
}

#[inline]
fn accumulate(data: &GridData, base: usize, w: f64, out: &mut [f64]) {
    if w == 0.0 {
        return;
    }
    let end = base + out.len();
    match data {
        GridData::F32(v) => out.iter_mut().zip(&v[base..end]).for_each(|(o, &x)| *o += w * x as f64),
        GridData::F64(v) => out.iter_mut().zip(&v[base..end]).for_each(|(o, &x)| *o += w * x),
    }
}

/// Bilinear interpolation into `out` (one value per channel). Points
/// outside the map are clamped to the border.
pub fn bilinear_into(features: &Grid, p: Point2, out: &mut [f64]) -> Result<()> {
    let (rows, cols, ch) = feature_dims(features)?;
    if out.len() != ch {
        return Err(Error::shape("bilinear", format!("output has {} slots for {ch} channels", out.len())));
    }
    if !p.is_finite() {
        return Err(Error::invalid("sample point", format!("{p:?} is not finite")));
    }
    let x = p.x.clamp(0.0, (cols - 1) as f64);
    let y = p.y.clamp(0.0, (rows - 1) as f64);
    let x0 = libm::floor(x) as usize;
    let y0 = libm::floor(y) as usize;
    let x1 = (x0 + 1).min(cols - 1);
    let y1 = (y0 + 1).min(rows - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    out.fill(0.0);
    let data = features.data();
    accumulate(data, (y0 * cols + x0) * ch, (1.0 - fx) * (1.0 - fy), out);
    accumulate(data, (y0 * cols + x1) * ch, fx * (1.0 - fy), out);
    accumulate(data, (y1 * cols + x0) * ch, (1.0 - fx) * fy, out);
    accumulate(data, (y1 * cols + x1) * ch, fx * fy, out);
    Ok(())
}

pub fn bilinear(features: &Grid, p: Point2) -> Result<Vec<f64>> {
    let (_, _, ch) = feature_dims(features)?;
    let mut out = vec![0.0; ch];
    bilinear_into(features, p, &mut out)?;
    Ok(out)
}

/// Samples the segment, max-pools consecutive groups of `pool_stride`
/// samples channel-wise, and concatenates the groups.
pub fn loi_pool(features: &Grid, quad: &Quadruplet, cfg: &PoolConfig) -> Result<LineFeatures> {
    cfg.validate()?;
    if features.role() != Role::Features && features.role() != Role::Generic {
        return Err(Error::invalid("loi_pool input", format!("expected a features grid, got {:?}", features.role())));
    }
    let (_, _, ch) = feature_dims(features)?;
    let groups = cfg.n_points / cfg.pool_stride;
    let mut semantic = vec![f64::NEG_INFINITY; groups * ch];
    let mut sample = vec![0.0; ch];
    for (i, p) in sample_points(quad, cfg.n_points).into_iter().enumerate() {
        bilinear_into(features, p, &mut sample)?;
        let g = i / cfg.pool_stride;
        semantic[g * ch..(g + 1) * ch].iter_mut().zip(&sample).for_each(|(m, &v)| *m = m.max(v));
    }
    Ok(LineFeatures {
        semantic,
        geometric: [quad.center.x, quad.center.y, quad.shift.x, quad.shift.y],
    })
}
