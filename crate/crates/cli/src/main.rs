//! `fieldtrack` command-line entry point.
//!
//! Exit status: 0 success, 1 usage error, 2 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fieldtrack::geometry::{AlignConfig, IterativeConfig, TransformFamily};
use fieldtrack::interchange::{load_sequence, save_sequence, FrameSource};
use fieldtrack::metrics::{alpha_grid, evaluate, read_mot};
use fieldtrack::simulator::generate;
use fieldtrack::tracker::track_sequence;
use fieldtrack::{CostMode, EvalConfig, SceneConfig, Similarity, TrackerConfig, WindowSpec};

#[derive(Parser)]
#[command(
    name = "fieldtrack",
    version,
    about = "3D multi-object tracking over per-window pointmaps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene into a sequence directory plus gt.txt.
    Simulate {
        /// Scene config (JSON). Omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track a sequence directory and write MOT-style rows.
    Track {
        sequence: PathBuf,
        out: PathBuf,
        /// Frames per window (W).
        #[arg(long, default_value_t = 10)]
        window_size: u32,
        /// Frames shared by consecutive windows (T).
        #[arg(long, default_value_t = 5)]
        overlap: u32,
        /// Memory horizon M in frames.
        #[arg(long, default_value_t = 30)]
        memory_frames: u32,
        /// Maximum association cost in scene units.
        #[arg(long, default_value_t = 0.5)]
        gate: f64,
        #[arg(long, value_enum, default_value_t = AlignMode::ClosedForm)]
        align_mode: AlignMode,
        #[arg(long, value_enum, default_value_t = Family::Affine)]
        transform: Family,
        #[arg(long, value_enum, default_value_t = CostArg::Centroid)]
        cost_mode: CostArg,
        /// Gate for point correspondences during window alignment.
        #[arg(long, default_value_t = 0.1)]
        align_max_dist: f64,
        /// Seed of the iterative solver's random start.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Diagnostics JSON path [default: <OUT>.diagnostics.json].
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Eval {
        gt: PathBuf,
        pred: PathBuf,
        #[arg(long, value_enum, default_value_t = SimArg::Iou)]
        similarity: SimArg,
        /// Distance at which 3D similarity reaches zero.
        #[arg(long, default_value_t = 1.0)]
        d_max: f64,
        /// Number of alpha thresholds, spaced 1/(n+1) apart.
        #[arg(long, default_value_t = 19)]
        alpha_steps: usize,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the per-alpha table as CSV.
        #[arg(long)]
        alpha_table: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignMode {
    ClosedForm,
    Iterative,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Affine,
    Projective,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Centroid,
    MutualNn,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimArg {
    Iou,
    Centroid,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, out, seed } => simulate(config.as_deref(), &out, seed),
        Command::Track {
            sequence,
            out,
            window_size,
            overlap,
            memory_frames,
            gate,
            align_mode,
            transform,
            cost_mode,
            align_max_dist,
            seed,
            diagnostics,
        } => {
            let window =
                WindowSpec::new(window_size, overlap).map_err(|e| Failure::Usage(e.to_string()))?;
            if !(gate.is_finite() && gate >= 0.0) {
                return Err(Failure::Usage(format!(
                    "--gate must be a non-negative number, got {gate}"
                )));
            }
            if !(align_max_dist.is_finite() && align_max_dist >= 0.0) {
                return Err(Failure::Usage(format!(
                    "--align-max-dist must be non-negative, got {align_max_dist}"
                )));
            }
            let config = TrackerConfig {
                window,
                memory_frames,
                gate,
                cost_mode: match cost_mode {
                    CostArg::Centroid => CostMode::Centroid,
                    CostArg::MutualNn => CostMode::MutualNn,
                },
                align: AlignConfig {
                    family: match transform {
                        Family::Affine => TransformFamily::Affine,
                        Family::Projective => TransformFamily::Projective,
                    },
                    iterative: matches!(align_mode, AlignMode::Iterative),
                    solver: IterativeConfig {
                        seed,
                        ..IterativeConfig::default()
                    },
                },
                align_max_dist,
            };
            let diagnostics = diagnostics.unwrap_or_else(|| {
                let mut name = out.clone().into_os_string();
                name.push(".diagnostics.json");
                PathBuf::from(name)
            });
            track(&sequence, &out, &diagnostics, &config)
        }
        Command::Eval {
            gt,
            pred,
            similarity,
            d_max,
            alpha_steps,
            report,
            alpha_table,
        } => {
            if alpha_steps == 0 {
                return Err(Failure::Usage("--alpha-steps must be at least 1".into()));
            }
            if !(d_max.is_finite() && d_max > 0.0) {
                return Err(Failure::Usage(format!(
                    "--d-max must be positive, got {d_max}"
                )));
            }
            let config = EvalConfig {
                similarity: match similarity {
                    SimArg::Iou => Similarity::Iou,
                    SimArg::Centroid => Similarity::Centroid { d_max },
                },
                alphas: alpha_grid(alpha_steps),
                ..EvalConfig::default()
            };
            eval(
                &gt,
                &pred,
                &config,
                report.as_deref(),
                alpha_table.as_deref(),
            )
        }
    }
}

fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut scene = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            SceneConfig::from_json(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => SceneConfig::default(),
    };
    if let Some(seed) = seed {
        scene.seed = seed;
    }
    let (sequence, gt) = generate(&scene)?;
    save_sequence(&sequence, out)?;
    let gt_path = out.join("gt.txt");
    std::fs::write(&gt_path, gt.to_mot())
        .with_context(|| format!("cannot write {}", gt_path.display()))?;
    let detections: usize = sequence.frames().iter().map(|f| f.detections.len()).sum();
    println!(
        "scene {:?}: {} frames, {} objects, {} groups, {} detections, seed {}",
        scene.name,
        sequence.manifest().frame_count,
        gt.objects.len(),
        sequence.manifest().groups.len(),
        detections,
        scene.seed
    );
    println!("wrote {} and {}", out.display(), gt_path.display());
    Ok(())
}

fn track(
    sequence: &Path,
    out: &Path,
    diagnostics: &Path,
    config: &TrackerConfig,
) -> Result<(), Failure> {
    let source =
        load_sequence(sequence).with_context(|| format!("cannot load {}", sequence.display()))?;
    let output = track_sequence(&source, config)?;
    output.table.write_mot(out)?;
    std::fs::write(diagnostics, output.diagnostics.to_json())
        .with_context(|| format!("cannot write {}", diagnostics.display()))?;
    println!(
        "{} rows, {} identities, {} windows ({} fallbacks), {} detections dropped",
        output.table.len(),
        output.table.ids().len(),
        output.diagnostics.windows.len(),
        output.diagnostics.fallback_count,
        output.diagnostics.dropped_detections
    );
    Ok(())
}

fn eval(
    gt: &Path,
    pred: &Path,
    config: &EvalConfig,
    report: Option<&Path>,
    alpha_table: Option<&Path>,
) -> Result<(), Failure> {
    let gt = read_mot(gt)?;
    let pred = read_mot(pred)?;
    let r = evaluate(&gt, &pred, config)?;
    print!("{}", r.summary());
    if let Some(path) = report {
        std::fs::write(path, r.to_json())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = alpha_table {
        std::fs::write(path, r.alpha_table())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
