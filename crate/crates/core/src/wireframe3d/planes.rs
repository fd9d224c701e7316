use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::hull::{convex_hull, distance_outside, plane_basis};
use super::FusionConfig;
use crate::linalg::symmetric_eigen3;
use crate::{CameraFrame, Grid, Point2, Result, Role, Vec3};

/// First and second moments of a point set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub sum: Vec3,
    /// `Σ x xᵀ`, row-major.
    pub outer: [[f64; 3]; 3],
}

impl Moments {
    pub fn add(&mut self, p: Vec3) {
        self.count += 1;
        self.sum = self.sum + p;
        let a = p.to_array();
        for i in 0..3 {
            for j in 0..3 {
                self.outer[i][j] += a[i] * a[j];
            }
        }
    }

    pub fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.sum = self.sum + o.sum;
        for i in 0..3 {
            for j in 0..3 {
                self.outer[i][j] += o.outer[i][j];
            }
        }
    }

    pub fn centroid(&self) -> Vec3 {
        self.sum / self.count as f64
    }

    /// Least-squares plane `(unit normal, offset)` through the points.
    pub fn fit(&self) -> (Vec3, f64) {
        let c = self.centroid().to_array();
        let n = self.count as f64;
        let mut cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] = self.outer[i][j] / n - c[i] * c[j];
            }
        }
        let (_, vecs) = symmetric_eigen3(cov);
        let normal = Vec3::from(vecs[0]).normalized();
        (normal, normal.dot(self.centroid()))
    }
}

/// A plane `normal · x = offset` with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub id: u32,
    pub normal: Vec3,
    pub offset: f64,
    pub moments: Moments,
    /// Convex hull vertices of the inliers, on the plane.
    pub bounds: Vec<Vec3>,
}

impl Plane {
    /// Fits a plane to `moments`, orienting the normal to agree with
    /// `orient` (flipped when their dot product is negative).
    pub fn fit(id: u32, moments: Moments, orient: Vec3, points: impl IntoIterator<Item = Vec3>) -> Self {
        let (mut normal, mut offset) = moments.fit();
        if normal.dot(orient) < 0.0 {
            normal = -normal;
            offset = -offset;
        }
        let mut p = Self { id, normal, offset, moments, bounds: Vec::new() };
        p.bounds = p.hull_of(points);
        p
    }

    pub fn count(&self) -> usize {
        self.moments.count
    }

    pub fn centroid(&self) -> Vec3 {
        self.moments.centroid()
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn project(&self, p: Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }

    /// In-plane coordinates relative to the centroid.
    pub fn local(&self, p: Vec3) -> Point2 {
        let (u, v) = plane_basis(self.normal);
        let d = p - self.centroid();
        Point2::new(d.dot(u), d.dot(v))
    }

    fn hull_of(&self, points: impl IntoIterator<Item = Vec3>) -> Vec<Vec3> {
        let (u, v) = plane_basis(self.normal);
        let c = self.project(self.centroid());
        let hull = convex_hull(points.into_iter().map(|p| Point2::new((p - c).dot(u), (p - c).dot(v))).collect());
        hull.into_iter().map(|q| c + u * q.x + v * q.y).collect()
    }

    /// The hull in this plane's current in-plane coordinates.
    pub fn local_hull(&self) -> Vec<Point2> {
        convex_hull(self.bounds.iter().map(|&b| self.local(b)).collect())
    }

    /// Absorbs another plane's evidence: moments add, the plane is refit
    /// (keeping this plane's normal orientation), and the hulls are united.
    pub fn absorb(&mut self, other: &Plane) {
        let mut m = self.moments;
        m.merge(&other.moments);
        let pts: Vec<Vec3> = self.bounds.iter().chain(&other.bounds).copied().collect();
        *self = Plane::fit(self.id, m, self.normal, Vec::new());
        self.bounds = self.hull_of(pts.into_iter().map(|p| self.project(p)).collect::<Vec<_>>());
    }
}

/// A plane found in one frame with the pixels supporting it.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedPlane {
    pub plane: Plane,
    /// Flat row-major pixel indices.
    pub pixels: Vec<usize>,
}

/// Depth jumps larger than this fraction of the depth break normal estimation.
const MAX_RELATIVE_JUMP: f64 = 0.1;

fn normals(frame: &CameraFrame, points: &[Option<Vec3>]) -> Vec<Option<Vec3>> {
    let (w, h) = frame.size();
    let eye = frame.pose.center();
    let mut out = vec![None; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let i = r * w + c;
            let (Some(p), Some(l), Some(rt), Some(up), Some(dn)) = (points[i], points[i - 1], points[i + 1], points[i - w], points[i + w]) else {
                continue;
            };
            let z = frame.depth_at(c, r);
            let jump = |a: usize, b: usize| {
                let (za, zb) = (frame.depth_at(a % w, a / w), frame.depth_at(b % w, b / w));
                (za - z).abs().max((zb - z).abs()) > MAX_RELATIVE_JUMP * z
            };
            if jump(i - 1, i + 1) || jump(i - w, i + w) {
                continue;
            }
            let n = (rt - l).cross(dn - up);
            let len = n.norm();
            if !(len > 0.0) {
                continue;
            }
            let n = n / len;
            out[i] = Some(if n.dot(eye - p) < 0.0 { -n } else { n });
        }
    }
    out
}

fn world_points(frame: &CameraFrame) -> Vec<Option<Vec3>> {
    let (w, h) = frame.size();
    (0..w * h).map(|i| frame.point_at(i % w, i / w)).collect()
}

/// Region growing over depth-derived normals.
///
/// Normals come from central differences of back-projected points. A region
/// grows through 4-neighbours whose normal is within `grow_angle_deg` of the
/// region's mean normal and whose point lies within `grow_distance` of the
/// plane through the region centroid. Regions smaller than `min_support`
/// pixels are dropped. Returns planes with ids `1..` and the per-pixel label
/// grid (0 = no plane).
pub fn detect_planes(frame: &CameraFrame, cfg: &FusionConfig) -> Result<(Vec<DetectedPlane>, Grid)> {
    let (w, h) = frame.size();
    let points = world_points(frame);
    let normals = normals(frame, &points);
    let eye = frame.pose.center();
    let cos_max = libm::cos(cfg.grow_angle_deg.to_radians());
    let mut labels = vec![0.0; w * h];
    let mut visited = vec![false; w * h];
    let mut planes = Vec::new();
    let mut queue = Vec::new();
    for seed in 0..w * h {
        let Some(n0) = normals[seed] else { continue };
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut moments = Moments::default();
        let mut nsum = n0;
        let mut pixels = vec![seed];
        moments.add(points[seed].expect("a normal implies a point"));
        queue.clear();
        queue.push(seed);
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            let (r, c) = (i / w, i % w);
            let mean_n = nsum.normalized();
            let centroid = moments.centroid();
            let neigh = [
                (r > 0).then(|| i - w),
                (r + 1 < h).then(|| i + w),
                (c > 0).then(|| i - 1),
                (c + 1 < w).then(|| i + 1),
            ];
            for q in neigh.into_iter().flatten() {
                if visited[q] {
                    continue;
                }
                let (Some(nq), Some(pq)) = (normals[q], points[q]) else { continue };
                if nq.dot(mean_n) >= cos_max && mean_n.dot(pq - centroid).abs() <= cfg.grow_distance {
                    visited[q] = true;
                    nsum = nsum + nq;
                    moments.add(pq);
                    pixels.push(q);
                    queue.push(q);
                }
            }
        }
        if pixels.len() < cfg.min_support {
            continue;
        }
        let id = planes.len() as u32 + 1;
        let plane = Plane::fit(id, moments, eye - moments.centroid(), pixels.iter().map(|&i| points[i].expect("region pixels have points")));
        for &i in &pixels {
            labels[i] = id as f64;
        }
        planes.push(DetectedPlane { plane, pixels });
    }
    Ok((planes, Grid::from_f64(vec![h, w], Role::PlaneLabels, labels)?))
}

/// Plane fits for an externally supplied label grid (0 = unlabeled). Labels
/// with fewer than `min_support` valid-depth pixels are ignored. Plane ids
/// are the given labels.
pub fn planes_from_labels(frame: &CameraFrame, labels: &Grid, cfg: &FusionConfig) -> Result<Vec<DetectedPlane>> {
    let (w, h) = frame.size();
    if labels.dims() != [h, w] {
        return Err(crate::Error::shape("planes_from_labels", alloc::format!("labels {:?} for a {w}x{h} frame", labels.dims())));
    }
    let eye = frame.pose.center();
    let mut groups: BTreeMap<u32, (Moments, Vec<usize>)> = BTreeMap::new();
    for i in 0..w * h {
        let id = labels.value(i);
        if !(id >= 1.0 && id == libm::floor(id) && id <= u32::MAX as f64) {
            continue;
        }
        if let Some(p) = frame.point_at(i % w, i / w) {
            let g = groups.entry(id as u32).or_default();
            g.0.add(p);
            g.1.push(i);
        }
    }
    Ok(groups
        .into_iter()
        .filter(|(_, (_, px))| px.len() >= cfg.min_support)
        .map(|(id, (m, pixels))| {
            let plane = Plane::fit(id, m, eye - m.centroid(), pixels.iter().map(|&i| frame.point_at(i % w, i / w).expect("grouped pixels have depth")));
            DetectedPlane { plane, pixels }
        })
        .collect())
}

/// The global plane set; ids are never reassigned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaneSet {
    pub planes: Vec<Plane>,
}

impl PlaneSet {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Plane> {
        self.planes.iter().find(|p| p.id == id)
    }

    pub fn next_id(&self) -> u32 {
        self.planes.iter().map(|p| p.id).max().unwrap_or(0) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    /// Global id the new plane now carries.
    pub id: u32,
    pub merged: bool,
    /// Best overlap ratio `N_i / N_new`, 0 for an empty set.
    pub ratio: f64,
    /// Unsigned normal angle to the best-overlap plane, in degrees.
    pub angle_deg: f64,
}

/// Overlap counts `N_i` of every global plane with the pixels of `new`.
///
/// Each candidate pixel's ray is intersected with every global plane; a hit
/// counts when it lands within `projection_margin` of the plane's hull, and
/// only the nearest such hit counts (z-buffering).
pub fn overlap_counts(global: &PlaneSet, new: &DetectedPlane, frame: &CameraFrame, cfg: &FusionConfig) -> Vec<usize> {
    let (w, _) = frame.size();
    let eye = frame.pose.center();
    let hulls: Vec<(Vec3, Vec3, Vec3, Vec<Point2>)> = global
        .planes
        .iter()
        .map(|p| {
            let (u, v) = plane_basis(p.normal);
            (p.centroid(), u, v, p.local_hull())
        })
        .collect();
    let mut counts = vec![0usize; global.len()];
    for &i in &new.pixels {
        let ray = frame.intrinsics.ray(Point2::new((i % w) as f64, (i / w) as f64));
        let d = frame.pose.row(0) * ray.x + frame.pose.row(1) * ray.y + frame.pose.row(2) * ray.z;
        let mut front: Option<(f64, usize)> = None;
        for (k, (p, (c, u, v, hull))) in global.planes.iter().zip(&hulls).enumerate() {
            let denom = p.normal.dot(d);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (p.offset - p.normal.dot(eye)) / denom;
            if !(t > 0.0) || front.is_some_and(|(ft, _)| ft <= t) {
                continue;
            }
            let x = eye + d * t - *c;
            if distance_outside(hull, Point2::new(x.dot(*u), x.dot(*v))) <= cfg.projection_margin {
                front = Some((t, k));
            }
        }
        if let Some((_, k)) = front {
            counts[k] += 1;
        }
    }
    counts
}

/// Merges `new` into the plane it overlaps most when the overlap ratio and
/// normal angle pass their thresholds; otherwise appends it with a fresh id.
pub fn merge_plane(global: &mut PlaneSet, new: &DetectedPlane, frame: &CameraFrame, cfg: &FusionConfig) -> MergeOutcome {
    let n_new = new.pixels.len().max(1);
    let counts = overlap_counts(global, new, frame, cfg);
    let best = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(k, &c)| (k, c));
    if let Some((k, c)) = best {
        let ratio = c as f64 / n_new as f64;
        let angle = new.plane.normal.line_angle_deg(global.planes[k].normal);
        if ratio >= cfg.overlap_ratio && angle <= cfg.normal_angle_deg {
            global.planes[k].absorb(&new.plane);
            return MergeOutcome { id: global.planes[k].id, merged: true, ratio, angle_deg: angle };
        }
        let id = global.next_id();
        global.planes.push(Plane { id, ..new.plane.clone() });
        return MergeOutcome { id, merged: false, ratio, angle_deg: angle };
    }
    let id = global.next_id();
    global.planes.push(Plane { id, ..new.plane.clone() });
    MergeOutcome { id, merged: false, ratio: 0.0, angle_deg: 0.0 }
}
