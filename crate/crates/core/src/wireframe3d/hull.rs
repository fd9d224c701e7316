//! Planar convex hulls used as plane extent summaries.

use alloc::vec::Vec;

use crate::{Point2, Vec3};

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull without collinear vertices.
pub fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: &mut dyn Iterator<Item = &Point2> = if pass == 0 { &mut pts.iter() } else { &mut pts.iter().rev() };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Distance from `q` to a convex CCW polygon; 0 inside.
pub fn distance_outside(hull: &[Point2], q: Point2) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => hull[0].dist(q),
        _ => {
            let mut inside = hull.len() >= 3;
            let mut best = f64::INFINITY;
            for i in 0..hull.len() {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                if cross(a, b, q) < 0.0 {
                    inside = false;
                }
                let ab = b - a;
                let t = ((q - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                best = best.min((a + ab * t).dist(q));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

/// Orthonormal in-plane axes `(u, v)` with `u x v = n`.
pub fn plane_basis(n: Vec3) -> (Vec3, Vec3) {
    let a = [n.x.abs(), n.y.abs(), n.z.abs()];
    let axis = if a[0] <= a[1] && a[0] <= a[2] {
        Vec3::new(1.0, 0.0, 0.0)
    } else if a[1] <= a[2] {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let u = axis.cross(n).normalized();
    (u, n.cross(u))
}
