//! Pinhole cameras and posed RGBD frames.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Point2, Result, Role, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Ray direction in camera coordinates with unit z.
    pub fn ray(&self, p: Point2) -> Vec3 {
        Vec3::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-space point with positive z.
    pub fn project(&self, c: Vec3) -> Point2 {
        Point2::new(self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy)
    }
}

/// Rigid world-to-camera transform `x_cam = R x_world + t`, stored row-major as 3x4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 12]", into = "[f64; 12]")]
pub struct Pose {
    pub m: [f64; 12],
}

impl From<[f64; 12]> for Pose {
    fn from(m: [f64; 12]) -> Self {
        Self { m }
    }
}

impl From<Pose> for [f64; 12] {
    fn from(p: Pose) -> Self {
        p.m
    }
}

impl Pose {
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    pub fn identity() -> Self {
        Self { m: [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0] }
    }

    /// Builds a pose from rotation rows and a translation.
    pub fn from_rows(r: [Vec3; 3], t: Vec3) -> Self {
        Self {
            m: [r[0].x, r[0].y, r[0].z, t.x, r[1].x, r[1].y, r[1].z, t.y, r[2].x, r[2].y, r[2].z, t.z],
        }
    }

    /// Camera at `center` looking along `forward` with `down` as image y.
    pub fn look(center: Vec3, forward: Vec3, down: Vec3) -> Self {
        let f = forward.normalized();
        let d = (down - f * down.dot(f)).normalized();
        let r = d.cross(f);
        let rows = [r, d, f];
        let t = -Vec3::new(rows[0].dot(center), rows[1].dot(center), rows[2].dot(center));
        Self::from_rows(rows, t)
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[4 * i], self.m[4 * i + 1], self.m[4 * i + 2])
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.m[3], self.m[7], self.m[11])
    }

    pub fn is_orthonormal(&self) -> bool {
        let rows = [self.row(0), self.row(1), self.row(2)];
        let mut ok = self.m.iter().all(|v| v.is_finite());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                ok &= (rows[i].dot(rows[j]) - expect).abs() <= Self::ORTHONORMAL_TOL;
            }
        }
        ok && (rows[0].cross(rows[1]).dot(rows[2]) - 1.0).abs() <= Self::ORTHONORMAL_TOL
    }

    pub fn world_to_camera(&self, w: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(w), self.row(1).dot(w), self.row(2).dot(w)) + self.translation()
    }

    pub fn camera_to_world(&self, c: Vec3) -> Vec3 {
        let d = c - self.translation();
        self.row(0) * d.x + self.row(1) * d.y + self.row(2) * d.z
    }

    /// Rotates a world direction into camera coordinates.
    pub fn rotate(&self, w: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(w), self.row(1).dot(w), self.row(2).dot(w))
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.camera_to_world(Vec3::ZERO)
    }
}

/// A posed depth frame. Depth is metric z along the optical axis; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    depth: Grid,
}

impl CameraFrame {
    pub fn new(intrinsics: Intrinsics, pose: Pose, depth: Grid) -> Result<Self> {
        if depth.role() != Role::Depth || depth.dims().len() != 2 {
            return Err(Error::invalid(
                "camera frame",
                format!("depth must be a 2D depth-role grid, got {:?} {:?}", depth.role(), depth.dims()),
            ));
        }
        Ok(Self { intrinsics, pose, depth })
    }

    pub fn depth(&self) -> &Grid {
        &self.depth
    }

    /// `(width, height)` in pixels.
    pub fn size(&self) -> (usize, usize) {
        (self.depth.dims()[1], self.depth.dims()[0])
    }

    pub fn depth_at(&self, col: usize, row: usize) -> f64 {
        self.depth.at(row, col, 0)
    }

    /// World point seen at integer pixel `(col, row)`, if its depth is valid.
    pub fn point_at(&self, col: usize, row: usize) -> Option<Vec3> {
        let z = self.depth_at(col, row);
        (z > 0.0).then(|| self.back_project(Point2::new(col as f64, row as f64), z))
    }

    /// World point along the ray through `p` at depth `z`.
    pub fn back_project(&self, p: Point2, z: f64) -> Vec3 {
        self.pose.camera_to_world(self.intrinsics.ray(p) * z)
    }

    /// Depth at a sub-pixel location by bilinear blending of the valid
    /// neighbours, falling back to the nearest valid pixel within 2 px.
    pub fn depth_interpolated(&self, p: Point2) -> Option<f64> {
        let (w, h) = self.size();
        if !(p.x > -1.0 && p.y > -1.0 && p.x < w as f64 && p.y < h as f64) {
            return None;
        }
        let x = p.x.clamp(0.0, (w - 1) as f64);
        let y = p.y.clamp(0.0, (h - 1) as f64);
        let x0 = libm::floor(x) as usize;
        let y0 = libm::floor(y) as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let corners = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ];
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (cx, cy, wgt) in corners {
            let z = self.depth_at(cx, cy);
            if z > 0.0 && wgt > 0.0 {
                acc += z * wgt;
                wsum += wgt;
            }
        }
        if wsum > 1e-9 {
            return Some(acc / wsum);
        }
        let (cx, cy) = (libm::round(x) as isize, libm::round(y) as isize);
        let mut best: Option<(isize, f64)> = None;
        for dy in -2isize..=2 {
            for dx in -2isize..=2 {
                let (qx, qy) = (cx + dx, cy + dy);
                if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                    continue;
                }
                let z = self.depth_at(qx as usize, qy as usize);
                let d = dx * dx + dy * dy;
                if z > 0.0 && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, z));
                }
            }
        }
        best.map(|(_, z)| z)
    }
}
