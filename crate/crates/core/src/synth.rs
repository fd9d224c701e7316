//! Ray-cast depth renderer for scenes of axis-aligned boxes, used as an
//! analytic fixture for plane detection and wireframe fusion.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::Annotation;
use crate::assemble::Quadruplet;
use crate::{CameraFrame, Grid, Intrinsics, Point2, Pose, Result, Role, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn corner(&self, i: usize) -> Vec3 {
        Vec3::new(
            if i & 1 == 0 { self.min.x } else { self.max.x },
            if i & 2 == 0 { self.min.y } else { self.max.y },
            if i & 4 == 0 { self.min.z } else { self.max.z },
        )
    }

    /// The 12 edges as corner pairs.
    pub fn edges(&self) -> Vec<[Vec3; 2]> {
        let mut out = Vec::with_capacity(12);
        for i in 0..8 {
            for bit in [1, 2, 4] {
                if i & bit == 0 {
                    out.push([self.corner(i), self.corner(i | bit)]);
                }
            }
        }
        out
    }

    /// Faces adjacent to the edge between corners `i` and `i | bit`, as face
    /// indices `2 * axis + side`.
    pub fn edge_faces(a: Vec3, b: Vec3, bx: &Aabb) -> [usize; 2] {
        let mut faces = [0; 2];
        let mut k = 0;
        for (axis, (va, vb)) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)].into_iter().enumerate() {
            if va == vb && k < 2 {
                let (lo, _) = axis_bounds(bx, axis);
                faces[k] = 2 * axis + (va != lo) as usize;
                k += 1;
            }
        }
        faces
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| {
            let (lo, hi) = axis_bounds(self, a);
            let v = axis(p, a);
            v > lo && v < hi
        })
    }
}

fn axis(v: Vec3, a: usize) -> f64 {
    match a {
        0 => v.x,
        1 => v.y,
        _ => v.z,
    }
}

fn axis_bounds(b: &Aabb, a: usize) -> (f64, f64) {
    (axis(b.min, a), axis(b.max, a))
}

/// A room viewed from inside plus solid boxes placed in it.
///
/// Face ids: room face `2 * axis + side` is `1 + 2 * axis + side` (side 0 is
/// the min face); face `f` of object `k` is `7 + 6 * k + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Aabb,
    pub objects: Vec<Aabb>,
}

impl Scene {
    pub fn room_face_id(face: usize) -> u32 {
        1 + face as u32
    }

    pub fn object_face_id(object: usize, face: usize) -> u32 {
        7 + 6 * object as u32 + face as u32
    }

    /// Nearest surface along `o + t d`, t > 0: `(t, face id)`.
    pub fn cast(&self, o: Vec3, d: Vec3) -> Option<(f64, u32)> {
        let mut best: Option<(f64, u32)> = None;
        // Leaving the room interior.
        for a in 0..3 {
            let da = axis(d, a);
            if da == 0.0 {
                continue;
            }
            let (lo, hi) = axis_bounds(&self.room, a);
            let (bound, side) = if da > 0.0 { (hi, 1) } else { (lo, 0) };
            let t = (bound - axis(o, a)) / da;
            if t > 0.0 && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, Self::room_face_id(2 * a + side)));
            }
        }
        for (k, b) in self.objects.iter().enumerate() {
            let (mut near, mut far, mut face) = (f64::NEG_INFINITY, f64::INFINITY, 0);
            let mut hit = true;
            for a in 0..3 {
                let (lo, hi) = axis_bounds(b, a);
                let (oa, da) = (axis(o, a), axis(d, a));
                if da == 0.0 {
                    if oa < lo || oa > hi {
                        hit = false;
                    }
                    continue;
                }
                let (t0, t1) = ((lo - oa) / da, (hi - oa) / da);
                let (enter, leave, side) = if t0 < t1 { (t0, t1, 0) } else { (t1, t0, 1) };
                if enter > near {
                    near = enter;
                    face = 2 * a + side;
                }
                far = far.min(leave);
            }
            if hit && near <= far && near > 0.0 && best.is_none_or(|(bt, _)| near < bt) {
                best = Some((near, Self::object_face_id(k, face)));
            }
        }
        best
    }
}

/// A rendered frame with the face id seen at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub frame: CameraFrame,
    pub faces: Grid,
}

/// Renders metric z-depth and face ids at pixel centers `(col, row)`.
pub fn render(scene: &Scene, intrinsics: Intrinsics, pose: Pose, width: usize, height: usize) -> Result<Rendered> {
    let o = pose.center();
    let mut depth = Vec::with_capacity(width * height);
    let mut faces = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let ray = intrinsics.ray(Point2::new(col as f64, row as f64));
            // World direction with unit camera-z, so the hit parameter is depth.
            let d = pose.row(0) * ray.x + pose.row(1) * ray.y + pose.row(2) * ray.z;
            match scene.cast(o, d) {
                Some((t, id)) => {
                    depth.push(t);
                    faces.push(id as f64);
                }
                None => {
                    depth.push(0.0);
                    faces.push(0.0);
                }
            }
        }
    }
    Ok(Rendered {
        frame: CameraFrame::new(intrinsics, pose, Grid::from_f64(alloc::vec![height, width], Role::Depth, depth)?)?,
        faces: Grid::from_f64(alloc::vec![height, width], Role::PlaneLabels, faces)?,
    })
}

/// Image of a world segment after clipping to `z >= near` and to the pixel
/// rectangle `[0, width - 1] x [0, height - 1]`.
pub fn project_segment(intrinsics: &Intrinsics, pose: &Pose, a: Vec3, b: Vec3, width: usize, height: usize) -> Option<[Point2; 2]> {
    const NEAR: f64 = 1e-3;
    let (mut ca, mut cb) = (pose.world_to_camera(a), pose.world_to_camera(b));
    if ca.z < NEAR && cb.z < NEAR {
        return None;
    }
    if ca.z < NEAR || cb.z < NEAR {
        let t = (NEAR - ca.z) / (cb.z - ca.z);
        let m = ca + (cb - ca) * t;
        if ca.z < NEAR {
            ca = m;
        } else {
            cb = m;
        }
    }
    let (pa, pb) = (intrinsics.project(ca), intrinsics.project(cb));
    let d = pb - pa;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    for (p, q) in [(-d.x, pa.x), (d.x, w - pa.x), (-d.y, pa.y), (d.y, h - pa.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else if p < 0.0 {
            lo = lo.max(q / p);
        } else {
            hi = hi.min(q / p);
        }
    }
    (lo < hi).then(|| [pa + d * lo, pa + d * hi])
}

/// Camera setup for a yaw sweep about the vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub scene: Scene,
    pub eye: Vec3,
    pub intrinsics: Intrinsics,
    pub width: usize,
    pub height: usize,
    /// Yaw of each frame in degrees; 0 looks along +x.
    pub yaws_deg: Vec<f64>,
    /// Projected edges shorter than this many pixels are dropped.
    pub min_line_px: f64,
}

impl Sweep {
    /// A 4 m x 4 m x 3 m room swept through a full turn from its center in
    /// 15 degree steps with a 90 degree field of view.
    pub fn cuboid_room() -> Self {
        let (width, height) = (480, 480);
        Self {
            scene: Scene { room: Aabb::new(Vec3::new(-2.0, -2.0, 0.0), Vec3::new(2.0, 2.0, 3.0)), objects: Vec::new() },
            eye: Vec3::new(0.0, 0.0, 1.5),
            intrinsics: Intrinsics { fx: 240.0, fy: 240.0, cx: (width as f64 - 1.0) / 2.0, cy: (height as f64 - 1.0) / 2.0 },
            width,
            height,
            yaws_deg: (0..24).map(|k| 15.0 * k as f64 + 2.5).collect(),
            min_line_px: 12.0,
        }
    }

    pub fn pose(&self, yaw_deg: f64) -> Pose {
        let y = yaw_deg.to_radians();
        Pose::look(self.eye, Vec3::new(libm::cos(y), libm::sin(y), 0.0), Vec3::new(0.0, 0.0, -1.0))
    }

    /// Renders every frame with the visible room and object edges as 2D lines.
    pub fn frames(&self) -> Result<Vec<(Rendered, Vec<Quadruplet>)>> {
        let mut edges = self.scene.room.edges();
        for o in &self.scene.objects {
            edges.extend(o.edges());
        }
        self.yaws_deg
            .iter()
            .map(|&yaw| {
                let pose = self.pose(yaw);
                let r = render(&self.scene, self.intrinsics, pose, self.width, self.height)?;
                let lines = edges
                    .iter()
                    .filter_map(|&[a, b]| project_segment(&self.intrinsics, &pose, a, b, self.width, self.height))
                    .filter(|[p, q]| p.dist(*q) >= self.min_line_px)
                    .map(|[p, q]| Quadruplet::from_endpoints(p, q, 1.0))
                    .collect();
                Ok((r, lines))
            })
            .collect()
    }
}

/// Junctions on a jittered `cols x rows` lattice covering a `size` image,
/// with up to `lines` lines drawn between lattice neighbours. Jitter stays
/// within a quarter of the lattice pitch, so neighbouring junctions never
/// come closer than half a pitch.
pub fn lattice_annotation(size: [u32; 2], cols: usize, rows: usize, lines: usize, seed: u64) -> Result<Annotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (px, py) = (size[0] as f64 / cols as f64, size[1] as f64 / rows as f64);
    let mut junctions = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let jx = rng.random_range(-0.25..0.25) * px;
            let jy = rng.random_range(-0.25..0.25) * py;
            junctions.push(Point2::new((c as f64 + 0.5) * px + jx, (r as f64 + 0.5) * py + jy));
        }
    }
    let mut candidates = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                candidates.push([i, i + 1]);
            }
            if r + 1 < rows {
                candidates.push([i, i + cols]);
            }
        }
    }
    candidates.shuffle(&mut rng);
    candidates.truncate(lines);
    Annotation::new(size, junctions, candidates)
}

/// A `[rows, cols, channels]` f32 feature grid with values uniform in `[0, 1)`.
pub fn random_features(rows: usize, cols: usize, channels: usize, seed: u64) -> Result<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols * channels).map(|_| rng.random::<f32>()).collect();
    Grid::from_f32(alloc::vec![rows, cols, channels], Role::Features, data)
}
