//! Per-stage latency measurement of the post-backbone pipeline.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use wkit_core::decode::DecodeMaps;
use wkit_core::gnn::GnnModel;
use wkit_core::pipeline::{assemble_stage, decode_stage, pool_stage, score_stage, DetectConfig};
use wkit_core::supervision::make_gt_maps;
use wkit_core::synth::{lattice_annotation, random_features};
use wkit_core::{Grid, Result};

pub const STAGES: [&str; 4] = ["decode", "assemble", "pool", "score"];

/// One benchmark input.
#[derive(Debug, Clone)]
pub struct Workload {
    pub maps: DecodeMaps,
    pub features: Grid,
}

/// A 512 x 512 image at stride 4: 300 lattice junctions and 300 lines on a
/// 128 x 128 grid, with a 256-channel feature map.
pub fn synthetic_workload(seed: u64) -> Result<Workload> {
    let ann = lattice_annotation([512, 512], 20, 15, 300, seed)?;
    let gt = make_gt_maps(&ann, 4.0, 1.0)?;
    Ok(Workload { maps: gt.to_decode_maps(), features: random_features(128, 128, 256, seed ^ 0x5eed)? })
}

/// Wall-clock samples per stage; `total[i]` equals the sum of the stage
/// samples of run `i` exactly, since stage intervals share their endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    pub stages: [Vec<Duration>; 4],
    pub total: Vec<Duration>,
    /// Lines scored in the last run.
    pub lines: usize,
}

/// Runs the four stages `repeats` times on each workload.
pub fn run(work: &[Workload], model: &GnnModel<f32>, cfg: &DetectConfig, repeats: usize) -> Result<Timings> {
    let mut t = Timings::default();
    for _ in 0..repeats {
        for w in work {
            let t0 = Instant::now();
            let decoded = decode_stage(&w.maps, &cfg.decode)?;
            let t1 = Instant::now();
            let graph = assemble_stage(&decoded, &cfg.assemble)?;
            let t2 = Instant::now();
            let pooled = pool_stage(&w.features, &graph, &cfg.pool, cfg.decode.output_stride)?;
            let t3 = Instant::now();
            let lines = score_stage(model, &graph, &pooled)?;
            let t4 = Instant::now();
            for (k, (a, b)) in [(t0, t1), (t1, t2), (t2, t3), (t3, t4)].into_iter().enumerate() {
                t.stages[k].push(b - a);
            }
            t.total.push(t4 - t0);
            t.lines = lines.len();
        }
    }
    Ok(t)
}

/// Median and nearest-rank 95th percentile.
pub fn summarize(samples: &[Duration]) -> (Duration, Duration) {
    if samples.is_empty() {
        return (Duration::ZERO, Duration::ZERO);
    }
    let mut s = samples.to_vec();
    s.sort();
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2 };
    let rank = (0.95 * n as f64).ceil() as usize;
    (median, s[rank.clamp(1, n) - 1])
}

/// CSV with one row per stage and a final `total` row. A single sample per
/// row is flagged low-confidence.
pub fn csv(t: &Timings) -> String {
    let mut out = String::from("stage,samples,median_ms,p95_ms,low_confidence\n");
    let rows = STAGES.iter().zip(&t.stages).map(|(n, s)| (*n, s.as_slice())).chain([("total", t.total.as_slice())]);
    for (name, s) in rows {
        let (m, p) = summarize(s);
        let _ = writeln!(out, "{name},{},{:.4},{:.4},{}", s.len(), m.as_secs_f64() * 1e3, p.as_secs_f64() * 1e3, s.len() <= 1);
    }
    out
}
