//! Acceptance suite. Every criterion is checked against an oracle written in
//! this file, independent of the library code under test, and reports one
//! PASS or FAIL line. The process exits nonzero when any criterion fails.

use std::collections::BTreeSet;
use std::error::Error as StdError;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wkit::bench;
use wkit::commands::{self, MapPaths, ToyTask, TrainArgs};
use wkit::io;
use wkit::PipelineConfig;
use wkit_core::assemble::{build_graph, make_proposals, match_endpoints, Adjacency};
use wkit_core::decode::nms_local_maxima;
use wkit_core::gnn::{backward, normalize_adjacency, GnnDims, GraphInput, GEOMETRIC_DIM};
use wkit_core::linalg::Matrix;
use wkit_core::metrics::sap;
use wkit_core::supervision::{bce_junction_loss, focal_center_loss, total_loss, FocalParams, LossParts, LossWeights};
use wkit_core::synth::{project_segment, render, Aabb, Sweep};
use wkit_core::wireframe3d::{classify_line, detect_planes, fuse_sequence, FrameInput, FusionConfig, LineLabel};
use wkit_core::{
    Annotation, Dtype, Grid, GnnModel, Keypoint, KeypointKind, Point2, Quadruplet, Role, SapConfig, ScoredSegment, Vec3,
};

type Outcome = Result<String, Box<dyn StdError>>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+).into());
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("gradient correctness", gradient_correctness),
        ("GCN dense-oracle equivalence", gcn_oracle),
        ("context-gain ablation", context_gain),
        ("assembly oracle", assembly_oracle),
        ("NMS oracle", nms_oracle),
        ("sAP correctness", sap_correctness),
        ("loss constants", loss_constants),
        ("end-to-end synthetic detection", end_to_end),
        ("3D room fixture", room_fixture),
        ("latency budget", latency_budget),
        ("format stability", format_stability),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r.map_err(|e| e.to_string()),
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .map_or_else(|| "panicked".into(), |m| format!("panicked: {m}"))),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Dense reference network

type Dense = Vec<Vec<f64>>;

fn dense(m: &Matrix<f64>) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn mm(a: &Dense, b: &Dense) -> Dense {
    let cols = b.first().map_or(0, Vec::len);
    a.iter().map(|row| (0..cols).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect()).collect()
}

fn add_bias(a: &mut Dense, bias: &Matrix<f64>) {
    for row in a {
        row.iter_mut().zip(bias.row(0)).for_each(|(x, b)| *x += b);
    }
}

fn relu(a: &Dense) -> Dense {
    a.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

/// `D^-1/2 (A + I) D^-1/2` entry by entry.
fn dense_norm(a: &[Vec<u8>]) -> Dense {
    let n = a.len();
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + a[i].iter().map(|&v| v as f64).sum::<f64>()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j || a[i][j] == 1 { 1.0 / (deg[i] * deg[j]).sqrt() } else { 0.0 }).collect())
        .collect()
}

fn residual(ah: &Dense, x: &Dense, w: &Matrix<f64>) -> Dense {
    let y = relu(&mm(&mm(ah, x), &dense(w)));
    y.iter().zip(x).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect()
}

struct Graph {
    semantic: Dense,
    geometric: Dense,
    adj: Vec<Vec<u8>>,
    labels: Vec<f64>,
}

impl Graph {
    fn random(rng: &mut ChaCha8Rng, max_vertices: usize, semantic_dim: usize) -> Self {
        let n = rng.random_range(1..=max_vertices);
        let mut adj = vec![vec![0u8; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    adj[i][j] = 1;
                    adj[j][i] = 1;
                }
            }
        }
        let mut row = |w: usize| (0..w).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
        let semantic = (0..n).map(|_| row(semantic_dim)).collect();
        let geometric = (0..n).map(|_| row(GEOMETRIC_DIM)).collect();
        let labels = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        Self { semantic, geometric, adj, labels }
    }

    fn input(&self) -> GraphInput<f64> {
        let m = |d: &Dense| Matrix::from_fn(d.len(), d[0].len(), |r, c| d[r][c]);
        let adj = Adjacency::from_dense(&self.adj).expect("symmetric");
        GraphInput::from_parts(m(&self.semantic), m(&self.geometric), &adj).expect("shapes agree")
    }
}

fn reference_logits(m: &GnnModel<f64>, g: &Graph) -> Vec<f64> {
    let ah = dense_norm(&g.adj);
    let mut z1 = mm(&g.semantic, &dense(&m.phi_w1));
    add_bias(&mut z1, &m.phi_b1);
    let mut e = mm(&relu(&z1), &dense(&m.phi_w2));
    add_bias(&mut e, &m.phi_b2);
    let mut geo = mm(&g.geometric, &dense(&m.psi_w));
    for l in 0..m.dims.layers {
        e = residual(&ah, &e, &m.gcn_ws[l]);
        geo = residual(&ah, &geo, &m.gcn_wg[l]);
    }
    let h: Dense = e.iter().zip(&geo).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    let mut z3 = mm(&h, &dense(&m.head_w1));
    add_bias(&mut z3, &m.head_b1);
    let mut out = mm(&relu(&z3), &dense(&m.head_w2));
    add_bias(&mut out, &m.head_b2);
    out.iter().map(|r| r[0]).collect()
}

/// Mean binary cross-entropy on logits.
fn reference_loss(logits: &[f64], labels: &[f64]) -> f64 {
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    logits.iter().zip(labels).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / logits.len() as f64
}

fn random_model(rng: &mut ChaCha8Rng, dims: GnnDims, scale: f64) -> GnnModel<f64> {
    let mut m = GnnModel::<f64>::zeros(dims);
    for (_, t) in m.tensors_mut() {
        t.as_mut_slice().iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
    }
    m
}

fn perturbed_loss(model: &GnnModel<f64>, g: &Graph, tensor: usize, entry: usize, delta: f64) -> f64 {
    let mut m = model.clone();
    m.tensors_mut()[tensor].1.as_mut_slice()[entry] += delta;
    reference_loss(&reference_logits(&m, g), &g.labels)
}

// 1 -------------------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-7;
    let start = Instant::now();
    let mut r = rng(101);
    let (mut worst, mut partials, graphs) = (0.0f64, 0usize, 24);
    for k in 0..graphs {
        let dims = GnnDims { semantic_dim: 6, d: 5, head_hidden: 4, layers: k % 4 };
        let model = random_model(&mut r, dims, 0.8);
        let g = Graph::random(&mut r, 6, dims.semantic_dim);
        let (loss, grads) = backward(&model, &g.input(), &g.labels)?;
        let want = reference_loss(&reference_logits(&model, &g), &g.labels);
        ensure!((loss - want).abs() < 1e-12, "graph {k}: loss {loss} vs reference {want}");
        for (ti, (name, grad)) in grads.tensors().into_iter().enumerate() {
            for (i, &a) in grad.as_slice().iter().enumerate() {
                let n = (perturbed_loss(&model, &g, ti, i, H) - perturbed_loss(&model, &g, ti, i, -H)) / (2.0 * H);
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(FLOOR);
                ensure!(rel <= 1e-4, "graph {k}, {name}[{i}]: analytic {a:e} vs numeric {n:e}");
                worst = worst.max(rel);
                partials += 1;
            }
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok(format!("{partials} partials over {graphs} graphs, max relative error {worst:.1e}"))
}

// 2 -------------------------------------------------------------------------

fn gcn_oracle() -> Outcome {
    let two = normalize_adjacency(&[vec![0, 1], vec![1, 0]])?;
    ensure!(two == vec![vec![0.5, 0.5], vec![0.5, 0.5]], "two-vertex normalization {two:?}");
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let dims = GnnDims { semantic_dim: 10, d: 7, head_hidden: 5, layers: k % 5 };
        let model = random_model(&mut r, dims, 0.6);
        let g = Graph::random(&mut r, 8, dims.semantic_dim);
        let norm = normalize_adjacency(&g.adj)?;
        let want_norm = dense_norm(&g.adj);
        let dn = norm.iter().flatten().zip(want_norm.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(dn <= 1e-15, "graph {k}: normalized adjacency differs by {dn:e}");
        let input = g.input();
        let logits = model.logits(&input)?;
        let scores = model.forward(&input)?;
        for (v, (&z, &want)) in logits.iter().zip(&reference_logits(&model, &g)).enumerate() {
            let p = 1.0 / (1.0 + (-want).exp());
            let err = (z - want).abs().max((scores[v] - p).abs());
            ensure!(err <= 1e-6, "graph {k} vertex {v}: logit {z} vs {want}");
            worst = worst.max(err);
        }
    }
    Ok(format!("100 graphs, max abs deviation {worst:.1e}"))
}

// 3 -------------------------------------------------------------------------

fn context_gain() -> Outcome {
    let start = Instant::now();
    let (mut deep_min, mut shallow_max) = (1.0f64, 0.0f64);
    for seed in 0..5 {
        let args = |layers| TrainArgs { task: ToyTask::Parity, layers, steps: 600, lr: 0.5, graphs: 16, pairs: 8, seed };
        let deep = commands::cmd_train_toy(&args(3))?.1.test_accuracy;
        let shallow = commands::cmd_train_toy(&args(0))?.1.test_accuracy;
        ensure!(deep >= 0.95, "seed {seed}: 3-layer test accuracy {deep}");
        ensure!(shallow <= 0.65, "seed {seed}: 0-layer test accuracy {shallow}");
        deep_min = deep_min.min(deep);
        shallow_max = shallow_max.max(shallow);
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(120), "took {t:?}");
    Ok(format!("5 seeds, 3-layer accuracy >= {deep_min:.3}, 0-layer <= {shallow_max:.3}"))
}

// 4 -------------------------------------------------------------------------

fn nearest_oracle(p: Point2, junctions: &[Keypoint]) -> Option<(usize, f64)> {
    let d2 = |j: &Keypoint| (p.x - j.pos.x).powi(2) + (p.y - j.pos.y).powi(2);
    let mut best: Option<(usize, f64)> = None;
    for (i, j) in junctions.iter().enumerate() {
        if best.is_none_or(|(_, b)| d2(j) < b) {
            best = Some((i, d2(j)));
        }
    }
    best.map(|(i, d)| (i, d.sqrt()))
}

fn assembly_oracle() -> Outcome {
    let mut r = rng(404);
    let (mut kept_total, mut edges_total) = (0usize, 0usize);
    for inst in 0..500 {
        let np = r.random_range(0..=50);
        let centers: Vec<Point2> = (0..np).map(|_| Point2::new(r.random_range(0.0..128.0), r.random_range(0.0..128.0))).collect();
        let shifts: Vec<Point2> = (0..np)
            .map(|_| {
                if r.random_bool(0.1) {
                    return Point2::new(0.0, 0.0);
                }
                let s = Point2::new(r.random_range(-20.0..20.0), r.random_range(-20.0..20.0));
                if s.x < 0.0 || (s.x == 0.0 && s.y < 0.0) { -s } else { s }
            })
            .collect();
        let scores: Vec<f64> = (0..np).map(|_| r.random()).collect();
        let props = make_proposals(&centers, &shifts, &scores)?;

        let expect: Vec<usize> = (0..np).filter(|&i| shifts[i].x != 0.0 || shifts[i].y != 0.0).collect();
        ensure!(props.len() == expect.len(), "instance {inst}: {} proposals, want {}", props.len(), expect.len());
        for (q, &i) in props.iter().zip(&expect) {
            let (c, s) = (centers[i], shifts[i]);
            let exact = q.j1.x == c.x - s.x && q.j1.y == c.y - s.y && q.j2.x == c.x + s.x && q.j2.y == c.y + s.y;
            ensure!(exact && q.center == c && q.shift == s && q.score == scores[i], "instance {inst}: proposal {i} is not center -/+ shift");
        }

        // Half the junctions sit near proposal endpoints, the rest anywhere.
        let nj = r.random_range(0..=50);
        let mut junctions: Vec<Keypoint> = (0..nj)
            .map(|_| {
                let pos = match props.choose(&mut r) {
                    Some(q) if r.random_bool(0.5) => {
                        let e = if r.random_bool(0.5) { q.j1 } else { q.j2 };
                        Point2::new(e.x + r.random_range(-5.0..5.0), e.y + r.random_range(-5.0..5.0))
                    }
                    _ => Point2::new(r.random_range(-10.0..138.0), r.random_range(-10.0..138.0)),
                };
                Keypoint { pos, score: r.random(), kind: KeypointKind::Junction }
            })
            .collect();
        junctions.shuffle(&mut r);
        let theta = r.random_range(2.0..20.0);
        let (kept, used) = match_endpoints(&props, &junctions, theta);

        let mut want_kept = Vec::new();
        let mut want_used = vec![false; junctions.len()];
        for q in &props {
            let (Some((a, da)), Some((b, db))) = (nearest_oracle(q.j1, &junctions), nearest_oracle(q.j2, &junctions)) else {
                continue;
            };
            if a != b && da + db <= theta {
                want_used[a] = true;
                want_used[b] = true;
                want_kept.push((junctions[a].pos, junctions[b].pos, q.center, q.shift, q.score));
            }
        }
        let got_kept: Vec<_> = kept.iter().map(|q| (q.j1, q.j2, q.center, q.shift, q.score)).collect();
        ensure!(got_kept == want_kept, "instance {inst}: kept lines differ from the exhaustive search");
        ensure!(kept.iter().all(|q| q.matched == [true, true]), "instance {inst}: kept lines must be flagged matched");
        let want_used: Vec<Point2> = junctions.iter().zip(&want_used).filter(|(_, &u)| u).map(|(j, _)| j.pos).collect();
        ensure!(used.iter().map(|j| j.pos).collect::<Vec<_>>() == want_used, "instance {inst}: used junctions differ");

        let graph = build_graph(kept.clone());
        let n = kept.len();
        let shares = |a: &Quadruplet, b: &Quadruplet| [a.j1, a.j2].iter().any(|p| *p == b.j1 || *p == b.j2);
        let dense = graph.adjacency.to_dense();
        for k in 0..n {
            for l in 0..n {
                let want = (k != l && shares(&kept[k], &kept[l])) as u8;
                ensure!(dense[k][l] == want, "instance {inst}: adjacency[{k}][{l}] = {}", dense[k][l]);
            }
        }
        let positions: BTreeSet<(u64, u64)> = kept.iter().flat_map(|q| [q.j1, q.j2]).map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
        ensure!(graph.junctions.len() == positions.len(), "instance {inst}: junction table has duplicates or gaps");
        for entry in &graph.junctions {
            let want: Vec<usize> = (0..n).filter(|&v| kept[v].j1 == entry.pos || kept[v].j2 == entry.pos).collect();
            ensure!(!entry.incident.is_empty() && entry.incident == want, "instance {inst}: incident list at {:?}", entry.pos);
        }

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let permuted = build_graph(perm.iter().map(|&i| kept[i]).collect()).adjacency.to_dense();
        for a in 0..n {
            for b in 0..n {
                ensure!(permuted[a][b] == dense[perm[a]][perm[b]], "instance {inst}: permutation does not conjugate adjacency");
            }
        }
        kept_total += n;
        edges_total += graph.adjacency.edges().len();
    }
    Ok(format!("500 instances, {kept_total} kept lines, {edges_total} edges"))
}

// 5 -------------------------------------------------------------------------

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Plateau-aware window scan: equal cells within one window of each other
/// form a plateau, reported once at its lowest row-major cell unless some
/// member sees a strictly larger value.
fn nms_brute(v: &[f64], rows: usize, cols: usize, window: usize, threshold: f64, max_k: usize) -> Vec<(usize, f64)> {
    let r = (window / 2) as isize;
    let neighbours = |i: usize| {
        let (row, col) = ((i / cols) as isize, (i % cols) as isize);
        let mut out = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let (qr, qc) = (row + dr, col + dc);
                if qr >= 0 && qc >= 0 && (qr as usize) < rows && (qc as usize) < cols {
                    out.push(qr as usize * cols + qc as usize);
                }
            }
        }
        out
    };
    let n = rows * cols;
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for q in neighbours(i) {
            if v[q] == v[i] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, q));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut dominated = vec![false; n];
    for i in 0..n {
        if neighbours(i).iter().any(|&q| v[q] > v[i]) {
            let root = find(&mut parent, i);
            dominated[root] = true;
        }
    }
    let mut peaks: Vec<(usize, f64)> = (0..n)
        .filter(|&i| find(&mut parent, i) == i && !dominated[i] && v[i] >= threshold)
        .map(|i| (i, v[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    peaks.truncate(max_k);
    peaks
}

fn nms_oracle() -> Outcome {
    let mut r = rng(505);
    let (mut peaks_total, mut plateau_grids) = (0usize, 0usize);
    for k in 0..200 {
        let (rows, cols) = (r.random_range(1..=64), r.random_range(1..=64));
        let levels = r.random_range(2..=6u32);
        let quantized = k % 4 != 0;
        let v: Vec<f64> = (0..rows * cols)
            .map(|_| if quantized { r.random_range(0..levels) as f64 / (levels - 1) as f64 } else { r.random() })
            .collect();
        let window = [1, 3, 5, 7][r.random_range(0..4)];
        let threshold = r.random_range(0.0..0.6);
        let max_k = if r.random_bool(0.3) { r.random_range(1..=20) } else { usize::MAX };
        let heat = Grid::from_f64(vec![rows, cols], Role::JunctionHeat, v.clone())?;
        let got = nms_local_maxima(&heat, window, threshold, max_k, KeypointKind::Junction)?;
        let want = nms_brute(&v, rows, cols, window, threshold, max_k);
        let got: Vec<(usize, f64)> = got.iter().map(|p| (p.pos.y as usize * cols + p.pos.x as usize, p.score)).collect();
        ensure!(got == want, "grid {k} ({rows}x{cols}, window {window}): {} peaks, oracle {}", got.len(), want.len());
        peaks_total += got.len();
        plateau_grids += quantized as usize;
    }
    Ok(format!("200 grids ({plateau_grids} with plateaus), {peaks_total} peaks"))
}

// 6 -------------------------------------------------------------------------

fn seg_dist(p: &[Point2; 2], g: &[Point2; 2]) -> f64 {
    let d2 = |a: Point2, b: Point2| (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    (d2(p[0], g[0]) + d2(p[1], g[1])).min(d2(p[0], g[1]) + d2(p[1], g[0]))
}

/// Ranks by score, matches each prediction to its nearest line, and
/// averages the interpolated precision at every true positive.
fn ap_oracle(preds: &[ScoredSegment], gts: &[[Point2; 2]], threshold: f64) -> (f64, Vec<(f64, f64)>) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap());
    let mut claimed = vec![false; gts.len()];
    let mut hits = Vec::new();
    for &i in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, seg) in gts.iter().enumerate() {
            let d = seg_dist(&preds[i].endpoints, seg);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((g, d));
            }
        }
        let hit = matches!(best, Some((g, d)) if d <= threshold && !claimed[g]);
        if let (true, Some((g, _))) = (hit, best) {
            claimed[g] = true;
        }
        hits.push(hit);
    }
    let mut tp = 0;
    let pr: Vec<(f64, f64)> = hits
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            tp += h as usize;
            (tp as f64 / (k + 1) as f64, tp as f64 / gts.len() as f64)
        })
        .collect();
    if gts.is_empty() {
        return (0.0, pr);
    }
    let ap = (0..pr.len())
        .filter(|&k| hits[k])
        .map(|k| pr[k..].iter().map(|p| p.0).fold(0.0, f64::max))
        .sum::<f64>()
        / gts.len() as f64;
    (ap, pr)
}

fn random_segment(r: &mut ChaCha8Rng) -> [Point2; 2] {
    let mut p = || Point2::new(r.random_range(0.0..128.0), r.random_range(0.0..128.0));
    [p(), p()]
}

fn sap_correctness() -> Outcome {
    let cfg = SapConfig::default();
    let mut r = rng(606);

    for k in 0..20 {
        let gts: Vec<Vec<[Point2; 2]>> = (0..r.random_range(1..4)).map(|_| (0..r.random_range(1..20)).map(|_| random_segment(&mut r)).collect()).collect();
        let preds: Vec<Vec<ScoredSegment>> = gts
            .iter()
            .map(|g| g.iter().map(|s| if r.random_bool(0.5) { ScoredSegment::new(s[1], s[0], r.random()) } else { ScoredSegment::new(s[0], s[1], r.random()) }).collect())
            .collect();
        let ap = sap(&preds, &gts, &cfg)?.ap;
        ensure!((ap - 1.0).abs() <= 1e-12, "perfect instance {k}: AP {ap}");
    }
    let gts = vec![vec![random_segment(&mut r)]];
    let empty = sap(&[Vec::new()], &gts, &cfg)?.ap;
    ensure!(empty == 0.0, "empty predictions: AP {empty}");

    let gt = vec![[Point2::new(10.0, 10.0), Point2::new(50.0, 10.0)], [Point2::new(20.0, 80.0), Point2::new(90.0, 40.0)]];
    let hand = vec![
        ScoredSegment::new(Point2::new(10.5, 10.0), Point2::new(50.0, 11.0), 0.9),
        ScoredSegment::new(Point2::new(60.0, 60.0), Point2::new(70.0, 100.0), 0.8),
        ScoredSegment::new(Point2::new(90.0, 41.0), Point2::new(21.0, 80.0), 0.7),
    ];
    let report = sap(std::slice::from_ref(&hand), std::slice::from_ref(&gt), &cfg)?;
    let (want, pr) = ap_oracle(&hand, &gt, cfg.threshold);
    ensure!((want - 5.0 / 6.0).abs() <= 1e-12, "hand oracle gives {want}");
    ensure!((report.ap - want).abs() <= 1e-12, "hand instance: AP {} vs oracle {want}", report.ap);
    let got_pr: Vec<(f64, f64)> = report.curve.iter().map(|p| (p.precision, p.recall)).collect();
    ensure!(got_pr == pr, "hand PR curve {got_pr:?} vs {pr:?}");

    for k in 0..50 {
        let gt: Vec<[Point2; 2]> = (0..r.random_range(1..12)).map(|_| random_segment(&mut r)).collect();
        let mut preds = Vec::new();
        for _ in 0..r.random_range(0..25) {
            let seg = if r.random_bool(0.6) {
                let g = gt[r.random_range(0..gt.len())];
                let j = r.random_range(0.0..3.0);
                let mut wobble = || Point2::new(r.random_range(-j..=j), r.random_range(-j..=j));
                [g[0] + wobble(), g[1] + wobble()]
            } else {
                random_segment(&mut r)
            };
            preds.push(ScoredSegment::new(seg[0], seg[1], r.random()));
        }
        let base = sap(std::slice::from_ref(&preds), std::slice::from_ref(&gt), &cfg)?.ap;
        let (want, _) = ap_oracle(&preds, &gt, cfg.threshold);
        ensure!((base - want).abs() <= 1e-12, "instance {k}: AP {base} vs oracle {want}");
        let moved: Vec<ScoredSegment> = preds.iter().map(|p| ScoredSegment { score: (4.0 * p.score).exp() - 3.0, ..*p }).collect();
        let ap = sap(&[moved], &[gt], &cfg)?.ap;
        ensure!((ap - base).abs() <= 1e-12, "instance {k}: monotone rescoring moved AP {base} -> {ap}");
    }
    Ok(format!("perfect 1.0, empty 0.0, hand instance AP {:.6} = 5/6, 50 rescored instances stable", report.ap))
}

// 7 -------------------------------------------------------------------------

fn loss_constants() -> Outcome {
    let f = FocalParams::default();
    ensure!(f.alpha == 2.0 && f.beta == 4.0, "focal defaults {f:?}");
    let heat = |v: Vec<f64>| Grid::from_f64(vec![v.len(), 1], Role::CenterHeat, v);
    let pixel = focal_center_loss(&heat(vec![0.5])?, &heat(vec![1.0])?, f)?;
    ensure!((pixel - 0.25 * std::f64::consts::LN_2).abs() <= 1e-12, "positive pixel term {pixel}");

    let (pred, gt): (Vec<f64>, Vec<f64>) = (vec![0.5, 0.3, 0.2, 0.9, 1.0], vec![1.0, 0.5, 0.0, 0.8, 1.0]);
    let clamp = |p: f64| p.clamp(1e-7, 1.0 - 1e-7);
    let want = -pred
        .iter()
        .zip(&gt)
        .map(|(&p, &y)| {
            let p = clamp(p);
            if y == 1.0 { (1.0 - p).powi(2) * p.ln() } else { (1.0 - y).powi(4) * p.powi(2) * (1.0 - p).ln() }
        })
        .sum::<f64>()
        / pred.len() as f64;
    let got = focal_center_loss(&heat(pred)?, &heat(gt)?, f)?;
    ensure!((got - want).abs() <= 1e-12, "mixed focal {got} vs {want}");

    let bce = bce_junction_loss(&heat(vec![0.5])?, &heat(vec![1.0])?)?;
    ensure!((bce - std::f64::consts::LN_2).abs() <= 1e-12, "junction BCE {bce}");

    let parts = LossParts { junction: 0.1, center: 0.2, offset: 0.3, shift: 0.4 };
    let fixture = total_loss(parts, LossWeights::default(), &[(-0.5f64).exp()], &[1.0])?;
    ensure!((fixture.total - 1.5).abs() <= 1e-12, "fixture total {}", fixture.total);

    let mut r = rng(707);
    for k in 0..50 {
        let parts = LossParts { junction: r.random(), center: r.random(), offset: r.random(), shift: r.random() };
        let w = LossWeights { lambda_j: r.random_range(0.0..3.0), lambda_c: r.random_range(0.0..3.0), lambda_o: r.random_range(0.0..3.0), lambda_s: r.random_range(0.0..3.0) };
        let n = r.random_range(0..10);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0.01..0.99)).collect();
        let labels: Vec<f64> = (0..n).map(|_| r.random_range(0..2) as f64).collect();
        let multitask = w.lambda_j * parts.junction + w.lambda_c * parts.center + w.lambda_o * parts.offset + w.lambda_s * parts.shift;
        let relation = if n == 0 {
            0.0
        } else {
            scores.iter().zip(&labels).map(|(&p, &y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())).sum::<f64>() / n as f64
        };
        let b = total_loss(parts, w, &scores, &labels)?;
        ensure!((b.multitask - multitask).abs() <= 1e-12 && (b.relation - relation).abs() <= 1e-12, "instance {k}: {b:?}");
        ensure!((b.total - (multitask + relation)).abs() <= 1e-12, "instance {k}: total {}", b.total);
    }
    let nan = total_loss(LossParts { center: f64::NAN, ..parts }, LossWeights::default(), &[], &[]);
    ensure!(nan.as_ref().is_err_and(|e| e.to_string().contains("center")), "NaN center term gave {nan:?}");
    Ok(format!("positive pixel {pixel:.12} = ln2/4, 50 weighted compositions exact"))
}

// 8 -------------------------------------------------------------------------

fn random_annotation(r: &mut ChaCha8Rng) -> Result<Annotation, Box<dyn StdError>> {
    const SIZES: [[u32; 2]; 4] = [[512, 512], [640, 480], [480, 640], [384, 384]];
    let size = SIZES[r.random_range(0..SIZES.len())];
    let (w, h) = (size[0] as f64, size[1] as f64);
    let mut junctions: Vec<Point2> = Vec::new();
    let target = r.random_range(6..=14);
    while junctions.len() < target {
        let p = Point2::new(r.random_range(6.0..w - 6.0), r.random_range(6.0..h - 6.0));
        if p.x.fract() != 0.0 && p.y.fract() != 0.0 && junctions.iter().all(|q| q.dist(p) >= 16.0) {
            junctions.push(p);
        }
    }
    let mut lines: Vec<[usize; 2]> = Vec::new();
    let mut centers: Vec<Point2> = Vec::new();
    let want = r.random_range(4..=12);
    for _ in 0..2000 {
        if lines.len() == want {
            break;
        }
        let (a, b) = (r.random_range(0..junctions.len()), r.random_range(0..junctions.len()));
        let c = (junctions[a] + junctions[b]) * 0.5;
        let fresh = !lines.iter().any(|l| (l[0] == a && l[1] == b) || (l[0] == b && l[1] == a));
        if a != b && fresh && junctions[a].dist(junctions[b]) >= 32.0 && centers.iter().all(|q| q.dist(c) >= 16.0) {
            lines.push([a, b]);
            centers.push(c);
        }
    }
    Ok(Annotation::new(size, junctions, lines)?)
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Channel 0 is 1 within 1.5 cells of a ground-truth segment and 0
/// elsewhere; the other channels are noise.
fn oracle_features(ann: &Annotation, rows: usize, cols: usize, channels: usize, stride: f64, r: &mut ChaCha8Rng) -> Result<Grid, Box<dyn StdError>> {
    let segs: Vec<(Point2, Point2)> = ann.segments().map(|(a, b)| (a / stride, b / stride)).collect();
    let mut data = Vec::with_capacity(rows * cols * channels);
    for row in 0..rows {
        for col in 0..cols {
            let p = Point2::new(col as f64, row as f64);
            let on = segs.iter().any(|&(a, b)| point_segment_distance(p, a, b) <= 1.5);
            data.push(on as u8 as f32);
            data.extend((1..channels).map(|_| r.random::<f32>()));
        }
    }
    Ok(Grid::from_f32(vec![rows, cols, channels], Role::Features, data)?)
}

/// Scores `20 * relu(sum of channel-0 group maxima - 7.5) - 5`, with the
/// graph layers zeroed: +5 for a line that stays on the marked band through
/// all eight groups, -5 otherwise.
fn oracle_model(channels: usize, groups: usize) -> GnnModel<f32> {
    let dims = GnnDims { semantic_dim: groups * channels, d: 2, head_hidden: 2, layers: 3 };
    let mut m = GnnModel::<f32>::zeros(dims);
    for g in 0..groups {
        m.phi_w1.set(g * channels, 0, 1.0);
    }
    m.phi_b1.set(0, 0, 0.5 - groups as f32);
    m.phi_w2.set(0, 0, 1.0);
    m.head_w1.set(0, 0, 1.0);
    m.head_w2.set(0, 0, 20.0);
    m.head_b2.set(0, 0, -5.0);
    m
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir()?;
    let cfg = PipelineConfig::default();
    let stride = cfg.decode.output_stride;
    let channels = 3;
    let groups = cfg.pool.n_points / cfg.pool.pool_stride;
    let weights = io::save_weights(&oracle_model(channels, groups), &dir.path().join("weights"))?;
    let mut r = rng(808);
    let (mut anns, mut docs) = (Vec::new(), Vec::new());
    for k in 0..20 {
        let ann = random_annotation(&mut r)?;
        let img = dir.path().join(format!("img{k}"));
        let ann_path = img.join("annotation.json");
        io::write_annotation(&ann, &ann_path)?;
        commands::cmd_make_gt(&ann_path, stride, 1.0, &img)?;
        let maps = MapPaths::in_dir(&img);
        let (rows, cols) = io::read_grid(&maps.junction_heat)?.rows_cols().ok_or("heatmap is not 2D")?;
        let features = img.join("features.wgt");
        io::write_grid(&oracle_features(&ann, rows, cols, channels, stride, &mut r)?, &features)?;
        let doc = commands::cmd_detect(&maps, &features, Some(&weights), &cfg)?;
        ensure!(doc.lines.len() == ann.lines.len(), "image {k}: {} lines detected for {} ground-truth lines", doc.lines.len(), ann.lines.len());
        ensure!(doc.lines.iter().all(|q| q.score > 0.99), "image {k}: a true line scored below 0.99");
        anns.push(ann);
        docs.push(doc);
    }
    let pred = dir.path().join("pred.json");
    let gt = dir.path().join("gt.json");
    io::write_json(&docs, &pred)?;
    io::write_json(&anns, &gt)?;
    let report = commands::cmd_eval_sap(&pred, &gt, &SapConfig { threshold: 10.0, resolution: [128, 128] })?;
    ensure!(report.ap >= 1.0 - 1e-12, "sAP {}", report.ap);
    Ok(format!("20 images, {} ground-truth lines, sAP {:.6}", report.gt_lines, report.ap))
}

// 9 -------------------------------------------------------------------------

fn edge_rms(ends: [Vec3; 2], edge: [Vec3; 2]) -> f64 {
    let straight = ends[0].dist(edge[0]).powi(2) + ends[1].dist(edge[1]).powi(2);
    let swapped = ends[0].dist(edge[1]).powi(2) + ends[1].dist(edge[0]).powi(2);
    (straight.min(swapped) / 2.0).sqrt()
}

fn room_fixture() -> Outcome {
    let cfg = FusionConfig::default();
    let sw = Sweep::cuboid_room();
    let inputs: Vec<FrameInput> = sw.frames()?.into_iter().map(|(r, lines)| FrameInput { frame: r.frame, lines, plane_labels: None }).collect();
    let model = fuse_sequence(&inputs, &cfg)?;
    let planes = &model.planes.planes;
    ensure!(planes.len() == 6, "{} planes", planes.len());
    let mut worst_angle = 0.0f64;
    for (i, a) in planes.iter().enumerate() {
        let parallel = planes.iter().enumerate().filter(|&(j, b)| j != i && a.normal.line_angle_deg(b.normal) <= 2.0).count();
        ensure!(parallel == 1, "plane {} has {parallel} parallel partners", a.id);
        for b in &planes[i + 1..] {
            let t = a.normal.line_angle_deg(b.normal);
            ensure!(t <= 2.0 || t >= 88.0, "planes {} and {} meet at {t:.2} degrees", a.id, b.id);
            worst_angle = worst_angle.max(t.min(90.0 - t));
        }
    }

    let edges = sw.scene.room.edges();
    ensure!(model.creases.len() == 12, "{} creases", model.creases.len());
    let mut matched = BTreeSet::new();
    let mut worst_rms = 0.0f64;
    for c in &model.creases {
        let (k, rms) = edges
            .iter()
            .enumerate()
            .map(|(k, &e)| (k, edge_rms(c.endpoints, e)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or("room has no edges")?;
        ensure!(rms <= 0.02, "crease between planes {:?} is {rms:.4} m RMS from the nearest edge", c.planes);
        ensure!(matched.insert(k), "two creases match room edge {k}");
        worst_rms = worst_rms.max(rms);
    }

    let labels = planted_labels(&cfg)?;
    Ok(format!("6 planes (max {worst_angle:.2} deg off axis), 12 creases (max RMS {:.1} mm), {labels} planted labels correct", worst_rms * 1e3))
}

/// Labels analytic edges in box-furnished room views, classified against
/// the planes detected in each frame.
fn planted_labels(cfg: &FusionConfig) -> Result<usize, Box<dyn StdError>> {
    use LineLabel::{Crease, Occlusion, Texture};
    let mut sw = Sweep::cuboid_room();
    sw.scene.objects.push(Aabb::new(Vec3::new(0.8, -0.3, 0.0), Vec3::new(1.2, 0.3, 1.0)));
    let v = Vec3::new;
    let cases: [(f64, [Vec3; 2], LineLabel); 14] = [
        (0.0, [v(2.0, -1.0, 3.0), v(2.0, 1.0, 3.0)], Crease),
        (0.0, [v(2.0, 0.9, 0.0), v(2.0, 1.7, 0.0)], Crease),
        (0.0, [v(0.8, -0.25, 1.0), v(0.8, 0.25, 1.0)], Crease),
        (0.0, [v(0.8, 0.3, 0.1), v(0.8, 0.3, 0.9)], Occlusion),
        (0.0, [v(0.8, -0.3, 0.1), v(0.8, -0.3, 0.9)], Occlusion),
        (0.0, [v(1.2, -0.25, 1.0), v(1.2, 0.25, 1.0)], Occlusion),
        (0.0, [v(2.0, -1.0, 2.2), v(2.0, 1.0, 2.2)], Texture),
        (0.0, [v(1.6, -1.0, 0.0), v(1.9, -1.0, 0.0)], Texture),
        (0.0, [v(1.6, 0.8, 3.0), v(1.9, 0.8, 3.0)], Texture),
        (30.0, [v(2.0, 2.0, 0.3), v(2.0, 2.0, 2.7)], Crease),
        (30.0, [v(1.0, 2.0, 3.0), v(1.9, 2.0, 3.0)], Crease),
        (30.0, [v(0.8, 0.3, 0.1), v(0.8, 0.3, 0.9)], Occlusion),
        (30.0, [v(1.5, 2.0, 1.0), v(1.5, 2.0, 2.0)], Texture),
        (30.0, [v(2.0, 1.2, 1.8), v(2.0, 1.6, 1.8)], Texture),
    ];
    let mut frames = Vec::new();
    for &(yaw, [a, b], want) in &cases {
        let frame = match frames.iter().position(|(y, _, _)| *y == yaw) {
            Some(i) => i,
            None => {
                let r = render(&sw.scene, sw.intrinsics, sw.pose(yaw), sw.width, sw.height)?;
                let (_, labels) = detect_planes(&r.frame, cfg)?;
                frames.push((yaw, r, labels));
                frames.len() - 1
            }
        };
        let (_, r, labels) = &frames[frame];
        let [p, q] = project_segment(&r.frame.intrinsics, &r.frame.pose, a, b, sw.width, sw.height)
            .ok_or_else(|| format!("edge {a:?}-{b:?} is not visible at yaw {yaw}"))?;
        let got = classify_line(&Quadruplet::from_endpoints(p, q, 1.0), labels, &r.frame, cfg)?;
        if got.label != want || got.low_confidence || (want == Crease) != got.planes.is_some() {
            return Err(format!("edge {a:?}-{b:?} at yaw {yaw}: {:?} (confidence {:.2}), want {want:?}", got.label, got.confidence).into());
        }
    }
    Ok(cases.len())
}

// 10 ------------------------------------------------------------------------

fn latency_budget() -> Outcome {
    let cfg = PipelineConfig::default();
    let detect = cfg.detect();
    let work = bench::synthetic_workload(cfg.seed)?;
    ensure!(work.features.dims() == [128, 128, 256], "features {:?}", work.features.dims());
    let decoded = wkit_core::pipeline::decode_stage(&work.maps, &detect.decode)?;
    ensure!(decoded.junctions.len() == 300 && decoded.centers.len() == 300, "{} junctions, {} centers", decoded.junctions.len(), decoded.centers.len());
    let model = GnnModel::<f32>::init(cfg.gnn_dims(256), cfg.seed);
    bench::run(std::slice::from_ref(&work), &model, &detect, 2)?;
    let t = bench::run(std::slice::from_ref(&work), &model, &detect, 21)?;
    ensure!(t.lines >= 290, "only {} lines scored", t.lines);
    for i in 0..t.total.len() {
        let sum: Duration = t.stages.iter().map(|s| s[i]).sum();
        ensure!(sum == t.total[i], "run {i}: stages sum to {sum:?}, total {:?}", t.total[i]);
    }
    let csv = bench::csv(&t);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    ensure!(names == ["decode", "assemble", "pool", "score", "total"], "CSV rows {names:?}");
    ensure!(rows.iter().all(|r| r[1] == "21" && r[4] == "false"), "CSV sample columns {csv}");
    let (median, _) = bench::summarize(&t.total);
    ensure!(median < Duration::from_millis(60), "median {median:?}");
    let ms = |k: usize| rows[k][2].parse::<f64>().unwrap_or(f64::NAN);
    Ok(format!(
        "median {:.1} ms (decode {:.1}, assemble {:.1}, pool {:.1}, score {:.1}) over {} lines",
        ms(4),
        ms(0),
        ms(1),
        ms(2),
        ms(3),
        t.lines
    ))
}

// 11 ------------------------------------------------------------------------

fn random_grid(r: &mut ChaCha8Rng) -> Result<Grid, Box<dyn StdError>> {
    let role = Role::ALL[r.random_range(0..Role::ALL.len())];
    let dims: Vec<usize> = if role.is_heatmap() || role == Role::Depth || role == Role::PlaneLabels {
        vec![r.random_range(1..12), r.random_range(1..12)]
    } else if role == Role::JunctionOffset || role == Role::CenterOffset || role == Role::ShiftVec {
        vec![r.random_range(1..8), r.random_range(1..8), 2]
    } else {
        (0..r.random_range(1..=4)).map(|_| r.random_range(1..6)).collect()
    };
    let n: usize = dims.iter().product();
    let special = [0.0, -0.0, f64::MIN_POSITIVE / 4.0, f64::MAX, f64::EPSILON, f64::from_bits(0x7ff8_0000_dead_beef)];
    let value = |r: &mut ChaCha8Rng| -> f64 {
        match role {
            Role::JunctionHeat | Role::CenterHeat => r.random(),
            Role::Depth => r.random_range(0.0..10.0),
            Role::PlaneLabels => r.random_range(0..20) as f64,
            Role::Generic if r.random_bool(0.2) => special[r.random_range(0..special.len())],
            _ => r.random_range(-1e3..1e3),
        }
    };
    let vals: Vec<f64> = (0..n).map(|_| value(r)).collect();
    Ok(if r.random_bool(0.5) {
        Grid::from_f64(dims, role, vals)?
    } else {
        Grid::from_f32(dims, role, vals.iter().map(|&v| v as f32).collect())?
    })
}

fn random_float_annotation(r: &mut ChaCha8Rng) -> Result<Annotation, Box<dyn StdError>> {
    let size = [r.random_range(1..4096), r.random_range(1..4096)];
    let n = r.random_range(2..30);
    let junctions: Vec<Point2> = (0..n).map(|_| Point2::new(r.random::<f64>() * size[0] as f64, r.random::<f64>() * size[1] as f64)).collect();
    let mut lines = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.random_bool(0.1) {
                lines.push(if r.random_bool(0.5) { [a, b] } else { [b, a] });
            }
        }
    }
    Ok(Annotation::new(size, junctions, lines)?)
}

fn annotation_bits(a: &Annotation) -> (Vec<u32>, Vec<u64>, Vec<[usize; 2]>) {
    (a.size.to_vec(), a.junctions.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits()]).collect(), a.lines.clone())
}

fn golden(name: &str) -> Result<Vec<u8>, Box<dyn StdError>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/wgt1").join(name);
    Ok(std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn format_stability() -> Outcome {
    let dir = tempfile::tempdir()?;
    let mut r = rng(1111);
    for k in 0..100 {
        let g = random_grid(&mut r)?;
        let (a, b) = (dir.path().join(format!("g{k}.wgt")), dir.path().join(format!("g{k}b.wgt")));
        io::write_grid(&g, &a)?;
        let back = io::read_grid(&a)?;
        ensure!(back.bit_eq(&g) && back.role() == g.role() && back.dims() == g.dims(), "grid {k} changed on round trip");
        io::write_grid(&back, &b)?;
        ensure!(std::fs::read(&a)? == std::fs::read(&b)?, "grid {k}: rewrite is not byte-identical");
        ensure!(std::fs::metadata(&a)?.len() as usize == g.encoded_len(), "grid {k}: file length");

        let ann = random_float_annotation(&mut r)?;
        let (a, b) = (dir.path().join(format!("a{k}.json")), dir.path().join(format!("a{k}b.json")));
        io::write_annotation(&ann, &a)?;
        let back = io::read_annotation(&a)?;
        ensure!(annotation_bits(&back) == annotation_bits(&ann), "annotation {k} changed on round trip");
        io::write_annotation(&back, &b)?;
        ensure!(std::fs::read(&a)? == std::fs::read(&b)?, "annotation {k}: rewrite is not byte-identical");
    }

    ensure!(wkit_core::grid::MAGIC == b"WGT1", "format magic changed; add a new golden directory");
    let fixtures: [(&str, Grid); 4] = [
        ("scalar_f32.wgt", Grid::from_f32(vec![1], Role::Generic, vec![1.0])?),
        ("shift_f64.wgt", Grid::from_f64(vec![2, 2, 2], Role::ShiftVec, vec![0.5, -1.25, 3.0, 0.0, -0.0, 1e-300, 2.5, -7.75])?),
        ("features_f32.wgt", Grid::from_f32(vec![2, 3, 4], Role::Features, (0..24).map(|i| i as f32 / 8.0 - 1.0).collect())?),
        ("center_heat_f32.wgt", Grid::from_f32(vec![2, 2], Role::CenterHeat, vec![0.0, 0.25, 1.0, 0.5])?),
    ];
    for (name, grid) in &fixtures {
        let bytes = golden(name)?;
        ensure!(grid.to_bytes()? == bytes, "{name}: encoding no longer matches the golden file");
        let decoded = Grid::from_bytes(&bytes)?;
        ensure!(decoded.bit_eq(grid) && decoded.dtype() == grid.dtype(), "{name}: golden file decodes differently");
    }
    ensure!(golden("scalar_f32.wgt")?.len() == 18 && fixtures[0].1.dtype() == Dtype::F32, "scalar golden file is not 18 bytes");
    let text = golden("annotation.json")?;
    let ann = Annotation::new(
        [512, 384],
        vec![Point2::new(5.25, 10.5), Point2::new(15.125, 10.0), Point2::new(100.0625, 200.75)],
        vec![[0, 1], [1, 2]],
    )?;
    ensure!(serde_json::from_slice::<Annotation>(&text)? == ann, "golden annotation parses differently");
    ensure!(io::to_json(&ann).into_bytes() == text, "annotation serialization no longer matches the golden file");
    Ok(format!("100 grids and 100 annotations round-trip bit-exactly, {} golden files unchanged", fixtures.len() + 1))
}
