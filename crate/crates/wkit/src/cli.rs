//! Argument parsing and dispatch for the `wkit` binary.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use wkit_core::gnn::GnnModel;

use crate::bench;
use crate::commands::{self, GradcheckArgs, MapPaths, ToyTask, TrainArgs};
use crate::config::{PipelineConfig, CONFIG_ENV};
use crate::error::{exit, CliError, Result};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "wkit", version, about = "Wireframe parsing from keypoint maps, line-graph scoring and RGBD wireframe fusion")]
pub struct Cli {
    /// Pipeline config (JSON). Falls back to $WKIT_CONFIG, then defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Print the effective config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Directory with the five standard map files written by `make-gt`.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[arg(long)]
    pub junction_heat: Option<PathBuf>,
    #[arg(long)]
    pub junction_offset: Option<PathBuf>,
    #[arg(long)]
    pub center_heat: Option<PathBuf>,
    #[arg(long)]
    pub center_offset: Option<PathBuf>,
    #[arg(long)]
    pub shift: Option<PathBuf>,
}

impl MapArgs {
    /// Individual paths override the files of `--maps`.
    pub fn resolve(&self) -> Result<MapPaths> {
        let base = self.maps.as_deref().map(MapPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from: Option<&PathBuf>, flag: &str| {
            explicit.clone().or_else(|| from.cloned()).ok_or_else(|| CliError::Usage(format!("missing --{flag} (or --maps)")))
        };
        Ok(MapPaths {
            junction_heat: pick(&self.junction_heat, base.as_ref().map(|b| &b.junction_heat), "junction-heat")?,
            junction_offset: pick(&self.junction_offset, base.as_ref().map(|b| &b.junction_offset), "junction-offset")?,
            center_heat: pick(&self.center_heat, base.as_ref().map(|b| &b.center_heat), "center-heat")?,
            center_offset: pick(&self.center_offset, base.as_ref().map(|b| &b.center_offset), "center-offset")?,
            shift: pick(&self.shift, base.as_ref().map(|b| &b.shift), "shift")?,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Junction and center candidates from heat, offset and shift maps.
    Decode {
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Line proposals snapped to junctions, as a graph.
    Assemble {
        /// Output of `decode`.
        #[arg(long)]
        decoded: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores a graph with the line-graph network.
    Score {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs decode, assemble, pool and score on one image or a batch.
    Detect {
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long, required_unless_present = "batch")]
        features: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Batch manifest `{"images":[{"name","maps","features"}]}`.
        #[arg(long, conflicts_with = "features", requires = "out_dir")]
        batch: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads for batches; images are independent.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renders training targets for an annotation as WGT1 grids.
    MakeGt {
        #[arg(long)]
        ann: PathBuf,
        /// Defaults to the config output stride.
        #[arg(long)]
        stride: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Structural AP of predictions against annotations.
    EvalSap {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Overrides the config threshold (squared pixels at eval resolution).
        #[arg(long)]
        threshold: Option<f64>,
        /// Writes the PR curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Fuses posed depth frames and their lines into a 3D wireframe.
    Fuse3d {
        #[arg(long)]
        frames: PathBuf,
        /// OBJ output; the JSON sidecar goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        graphs: usize,
        #[arg(long, default_value_t = 6)]
        max_vertices: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Trains the network on a synthetic graph task.
    TrainToy {
        #[arg(long, value_enum, default_value_t = ToyTask::Parity)]
        task: ToyTask,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 600)]
        steps: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        graphs: usize,
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        /// Writes the trained weights as a manifest directory.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Per-stage latency of the detection pipeline as CSV.
    Bench {
        /// Batch manifest as for `detect --batch`; defaults to a synthetic
        /// image with 300 junctions and 300 lines.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Weights to time; random weights of the configured size otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => io::write_bytes(p, text.as_bytes()),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn bench_inputs(input: Option<&Path>, seed: u64) -> Result<Vec<bench::Workload>> {
    let Some(manifest) = input else {
        return Ok(vec![bench::synthetic_workload(seed)?]);
    };
    let batch: commands::BatchManifest = io::read_json(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    batch
        .images
        .iter()
        .map(|img| Ok(bench::Workload { maps: MapPaths::in_dir(&base.join(&img.maps)).read()?, features: io::read_grid(&base.join(&img.features))? }))
        .collect()
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::resolve(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.print_config {
        return emit(&io::to_json(&cfg), None);
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    match command {
        Command::Decode { maps, out } => emit(&io::to_json(&commands::cmd_decode(&maps.resolve()?, &cfg)?), out.as_deref()),
        Command::Assemble { decoded, out } => emit(&io::to_json(&commands::cmd_assemble(&decoded, &cfg)?), out.as_deref()),
        Command::Score { graph, features, weights, out } => {
            emit(&io::to_json(&commands::cmd_score(&graph, &features, weights.as_deref(), &cfg)?), out.as_deref())
        }
        Command::Detect { maps, features, weights, batch, out_dir, jobs, out } => match (batch, features) {
            (Some(b), _) => {
                let dir = out_dir.expect("clap requires --out-dir with --batch");
                let written = commands::cmd_detect_batch(&b, &dir, weights.as_deref(), jobs, &cfg)?;
                let list: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
                emit(&io::to_json(&list), out.as_deref())
            }
            (None, Some(f)) => emit(&io::to_json(&commands::cmd_detect(&maps.resolve()?, &f, weights.as_deref(), &cfg)?), out.as_deref()),
            (None, None) => Err(CliError::Usage("detect needs --features or --batch".into())),
        },
        Command::MakeGt { ann, stride, sigma, out_dir } => {
            let written = commands::cmd_make_gt(&ann, stride.unwrap_or(cfg.decode.output_stride), sigma, &out_dir)?;
            let list: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            emit(&io::to_json(&list), None)
        }
        Command::EvalSap { pred, gt, threshold, curve } => {
            let mut sap = cfg.sap;
            if let Some(t) = threshold {
                sap.threshold = t;
            }
            let report = commands::cmd_eval_sap(&pred, &gt, &sap)?;
            if let Some(c) = curve {
                io::write_bytes(&c, io::pr_curve_csv(&report).as_bytes())?;
            }
            let summary = serde_json::json!({
                "ap": report.ap,
                "threshold": report.threshold,
                "resolution": report.resolution,
                "gt_lines": report.gt_lines,
                "predictions": report.predictions,
            });
            emit(&io::to_json(&summary), None)
        }
        Command::Fuse3d { frames, out } => {
            let model = commands::cmd_fuse3d(&frames, &out, &cfg)?;
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
            let summary = serde_json::json!({
                "planes": model.planes.len(),
                "lines": model.lines.len(),
                "creases": model.creases.len(),
                "obj": out.display().to_string(),
                "sidecar": io::sidecar_path(&out).display().to_string(),
            });
            emit(&io::to_json(&summary), None)
        }
        Command::Gradcheck { graphs, max_vertices, layers, h, tolerance } => {
            let report = commands::cmd_gradcheck(&GradcheckArgs { graphs, max_vertices, layers, h, tolerance, seed: cfg.seed })?;
            emit(&io::to_json(&report), None)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Numeric(format!("gradient check: max relative error {:e} exceeds {:e}", report.max_rel_err, tolerance)))
            }
        }
        Command::TrainToy { task, layers, steps, lr, graphs, pairs, save } => {
            let (model, summary) = commands::cmd_train_toy(&TrainArgs { task, layers, steps, lr, graphs, pairs, seed: cfg.seed })?;
            if let Some(dir) = save {
                io::save_weights(&model, &dir)?;
            }
            emit(&io::to_json(&summary), None)
        }
        Command::Bench { input, repeats, weights, out } => {
            if repeats == 0 {
                return Err(CliError::Usage("--repeats must be at least 1".into()));
            }
            let work = bench_inputs(input.as_deref(), cfg.seed)?;
            let channels = work.first().map_or(0, |w| w.features.channels());
            let model: GnnModel<f32> = match weights.or_else(|| cfg.gnn.weights.clone()) {
                Some(p) => io::load_weights(&p)?,
                None => GnnModel::init(cfg.gnn_dims(channels), cfg.seed),
            };
            let timings = bench::run(&work, &model, &cfg.detect(), repeats)?;
            emit(&bench::csv(&timings), out.as_deref())
        }
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::VALIDATION } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
