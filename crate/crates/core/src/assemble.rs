//! Line proposals from centers and shifts, endpoint snapping, and the
//! candidate line graph.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Keypoint, Point2, Result};

/// One line segment: endpoints, central point and half-length shift vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadruplet {
    pub j1: Point2,
    pub j2: Point2,
    pub center: Point2,
    pub shift: Point2,
    pub score: f64,
    #[serde(default)]
    pub matched: [bool; 2],
}

impl Quadruplet {
    /// Proposal with endpoints `center -/+ shift`. The shift is canonicalized first.
    pub fn from_center(center: Point2, shift: Point2, score: f64) -> Self {
        let shift = shift.canonical_direction();
        Self { j1: center - shift, j2: center + shift, center, shift, score, matched: [false; 2] }
    }

    /// Segment between two endpoints, kept in the given order, with center
    /// and canonical shift derived from them.
    pub fn from_endpoints(a: Point2, b: Point2, score: f64) -> Self {
        let center = (a + b) * 0.5;
        let shift = ((b - a) * 0.5).canonical_direction();
        Self { j1: a, j2: b, center, shift, score, matched: [false; 2] }
    }

    pub fn length(&self) -> f64 {
        self.j1.dist(self.j2)
    }

    /// Same segment with all coordinates multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { j1: self.j1 * s, j2: self.j2 * s, center: self.center * s, shift: self.shift * s, ..*self }
    }

    /// Same segment with the endpoint order swapped.
    pub fn reversed(&self) -> Self {
        Self { j1: self.j2, j2: self.j1, matched: [self.matched[1], self.matched[0]], ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleConfig {
    /// Bound on the summed endpoint-to-junction distance, in pixels.
    pub theta: f64,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        Self { theta: 15.0 }
    }
}

impl AssembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta > 0.0 && self.theta.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("assemble config", format!("theta {} must be positive", self.theta)))
        }
    }
}

/// One proposal per center with a nonzero shift.
pub fn make_proposals(centers: &[Point2], shifts: &[Point2], scores: &[f64]) -> Result<Vec<Quadruplet>> {
    if centers.len() != shifts.len() || centers.len() != scores.len() {
        return Err(Error::shape(
            "make_proposals",
            format!("{} centers, {} shifts, {} scores", centers.len(), shifts.len(), scores.len()),
        ));
    }
    Ok(centers
        .iter()
        .zip(shifts)
        .zip(scores)
        .filter(|((_, s), _)| s.norm() > 0.0)
        .map(|((&c, &s), &score)| Quadruplet::from_center(c, s, score))
        .collect())
}

fn nearest(p: Point2, junctions: &[Keypoint]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, j) in junctions.iter().enumerate() {
        let d = p.dist2(j.pos);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, d2)| (i, libm::sqrt(d2)))
}

/// Snaps proposal endpoints to their nearest junctions.
///
/// A proposal survives when its two endpoints pick distinct junctions and
/// the two distances sum to at most `theta`. Junctions no survivor uses are
/// dropped; the rest keep their input order.
pub fn match_endpoints(proposals: &[Quadruplet], junctions: &[Keypoint], theta: f64) -> (Vec<Quadruplet>, Vec<Keypoint>) {
    let mut used = vec![false; junctions.len()];
    let mut kept = Vec::new();
    for q in proposals {
        let (Some((a, da)), Some((b, db))) = (nearest(q.j1, junctions), nearest(q.j2, junctions)) else {
            continue;
        };
        if a == b || !(da + db <= theta) {
            continue;
        }
        used[a] = true;
        used[b] = true;
        kept.push(Quadruplet { j1: junctions[a].pos, j2: junctions[b].pos, matched: [true, true], ..*q });
    }
    let used_junctions = junctions.iter().zip(&used).filter(|(_, &u)| u).map(|(j, _)| *j).collect();
    (kept, used_junctions)
}

/// Symmetric 0/1 adjacency over line vertices, stored as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self { neighbors: vec![Vec::new(); n] }
    }

    /// From undirected edges; duplicates collapse, self loops are rejected.
    pub fn from_edges(n: usize, edges: &[[usize; 2]]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &[a, b] in edges {
            if a >= n || b >= n {
                return Err(Error::Index { op: "adjacency", detail: format!("edge [{a}, {b}] with {n} vertices") });
            }
            if a == b {
                return Err(Error::invalid("adjacency", format!("self loop at {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    /// From a dense square 0/1 matrix, which must be symmetric with a zero diagonal.
    pub fn from_dense(m: &[Vec<u8>]) -> Result<Self> {
        let n = m.len();
        let mut edges = Vec::new();
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::shape("adjacency", format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || v != m[j][i] {
                    return Err(Error::invalid("adjacency", format!("entry ({i}, {j}) breaks 0/1 symmetry")));
                }
                if i == j && v != 0 {
                    return Err(Error::invalid("adjacency", format!("nonzero diagonal at {i}")));
                }
                if v == 1 && i < j {
                    edges.push([i, j]);
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Edges `[a, b]` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| [a, b]))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.len();
        let mut m = vec![vec![0u8; n]; n];
        for (a, ns) in self.neighbors.iter().enumerate() {
            for &b in ns {
                m[a][b] = 1;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionEntry {
    pub pos: Point2,
    pub incident: Vec<usize>,
}

/// Line vertices, the junctions they touch, and the shared-junction adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    pub vertices: Vec<Quadruplet>,
    pub junctions: Vec<JunctionEntry>,
    pub adjacency: Adjacency,
}

fn key(p: Point2) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

/// Connects every pair of lines that share a snapped endpoint.
pub fn build_graph(kept: Vec<Quadruplet>) -> CandidateGraph {
    let mut index: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut junctions: Vec<JunctionEntry> = Vec::new();
    for (v, q) in kept.iter().enumerate() {
        for p in [q.j1, q.j2] {
            let slot = *index.entry(key(p)).or_insert_with(|| {
                junctions.push(JunctionEntry { pos: p, incident: Vec::new() });
                junctions.len() - 1
            });
            let inc = &mut junctions[slot].incident;
            if inc.last() != Some(&v) {
                inc.push(v);
            }
        }
    }
    let mut edges = Vec::new();
    for j in &junctions {
        for (i, &a) in j.incident.iter().enumerate() {
            for &b in &j.incident[i + 1..] {
                edges.push([a, b]);
            }
        }
    }
    // Incident lists hold distinct vertices, so no self loops can occur.
    let adjacency = Adjacency::from_edges(kept.len(), &edges).expect("edges come from incident lists");
    CandidateGraph { vertices: kept, junctions, adjacency }
}

/// Proposals, snapping and graph construction in one call.
pub fn assemble(
    centers: &[Keypoint],
    shifts: &[Point2],
    junctions: &[Keypoint],
    cfg: &AssembleConfig,
) -> Result<(CandidateGraph, Vec<Keypoint>)> {
    cfg.validate()?;
    let pos: Vec<Point2> = centers.iter().map(|c| c.pos).collect();
    let scores: Vec<f64> = centers.iter().map(|c| c.score).collect();
    let proposals = make_proposals(&pos, shifts, &scores)?;
    let (kept, used) = match_endpoints(&proposals, junctions, cfg.theta);
    Ok((build_graph(kept), used))
}
