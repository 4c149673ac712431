use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fusetrack::appearance::{train_embedder, EmbedderTrainConfig};
use fusetrack::config::{load_config, RunConfig};
use fusetrack::fusion::{run_tri_tracker, MotionSet};
use fusetrack::io::{self, group_track_lines, load_scene, read_jsonl, track_lines, write_jsonl, CameraFrame, RadarFrame, TrackLine};
use fusetrack::metrics::{evaluate_sequence, ClearCounts, GroundTruthFrame, MotpDenominator};
use fusetrack::motion::{evaluate_predictor, train_bilstm, BiLstmPredictor, BiLstmTrainConfig, MotionModel, RegressionReport};
use fusetrack::report::{emit_trajectory_plot, run_ablation, standard_variants, write_table, PlotPanel, TRACKERS};
use fusetrack::sim::{default_calibration, simulate, synthetic_identity_features, training_trajectories, ScenarioSpec, SensorNoiseModel, Template};

#[derive(Parser)]
#[command(name = "fusetrack", version, about = "Radar-camera fusion multi-object tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Bev,
    Pixel,
}

#[derive(Clone, Copy, ValueEnum)]
enum Denominator {
    Gt,
    Matches,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: ground truth plus camera and radar logs.
    Simulate {
        #[arg(long, default_value = "crossing_trio")]
        template: String,
        #[arg(long, default_value_t = 600)]
        frames: usize,
        #[arg(long)]
        night: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero all sensor noise and failure probabilities.
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the appearance embedder on a synthetic identity dataset.
    TrainEmbedder {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        identities: usize,
        #[arg(long, default_value_t = 30)]
        per_identity: usize,
        #[arg(long, default_value_t = 32)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0.12)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Bi-LSTM motion predictor on simulator trajectories.
    TrainMotion {
        #[arg(long, value_enum)]
        space: Space,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of simulated scenes per template used for training.
        #[arg(long, default_value_t = 6)]
        scenes: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the camera, radar and fused trackers over sensor logs.
    Track {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        radar: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// CLEAR metrics of track files against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        tracks: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gate: f64,
        #[arg(long, value_enum, default_value_t = Denominator::Gt)]
        motp_denominator: Denominator,
        /// Also write one CSV row per track file here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare method variants on one scene.
    Ablate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained BEV / pixel Bi-LSTM parameters; trained on the fly when absent.
        #[arg(long, requires = "pixel_params")]
        bev_params: Option<PathBuf>,
        #[arg(long, requires = "bev_params")]
        pixel_params: Option<PathBuf>,
        /// Seed for on-the-fly motion training.
        #[arg(long, default_value_t = 0)]
        train_seed: u64,
        /// Only the Kalman variants.
        #[arg(long)]
        kalman_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trajectory plot (SVG + CSV) of track files over ground truth.
    Plot {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        tracks: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { template, frames, night, seed, noiseless, out } => {
            let template: Template = template.parse()?;
            let spec = ScenarioSpec { night, ..ScenarioSpec::new(template, frames, seed) };
            let noise = if noiseless { SensorNoiseModel::noiseless() } else { SensorNoiseModel::default() };
            let scene = simulate(&spec, &noise, &default_calibration())?;
            io::write_scene(&scene, &out)?;
            println!("wrote {} frames of {} (seed {seed}) to {}", frames, template.name(), out.display());
        }
        Command::TrainEmbedder { seed, identities, per_identity, feature_dim, sigma, out } => {
            let data = synthetic_identity_features(identities, per_identity, feature_dim, sigma, seed)?;
            let cfg = EmbedderTrainConfig { seed, ..Default::default() };
            let trained = train_embedder(&data, &cfg)?;
            io::write_json(&out, &trained)?;
            let summary = serde_json::json!({
                "seed": seed,
                "threshold": trained.threshold,
                "validation_accuracy": trained.validation_accuracy,
                "test_accuracy": trained.test_accuracy,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::TrainMotion { space, seed, scenes, epochs, out } => {
            let (predictor, held_out) = train_motion(space, seed, scenes, epochs)?;
            predictor.save(&out)?;
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "seed": seed, "held_out": held_out }))?);
        }
        Command::Track { camera, radar, config, out } => {
            let cfg = resolve_config(config.as_deref())?;
            let cam: Vec<CameraFrame> = read_jsonl(&camera)?;
            let rad: Vec<RadarFrame> = read_jsonl(&radar)?;
            let run = run_tri_tracker(&cam, &rad, &cfg.pipeline(), &cfg.motion_set()?)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for k in TRACKERS {
                write_jsonl(&out.join(format!("{}.jsonl", k.name())), &track_lines(run.series(k), k.name()))?;
            }
            std::fs::write(out.join("resolved_config.toml"), cfg.to_toml())?;
            println!("wrote camera.jsonl, radar.jsonl, fused.jsonl to {}", out.display());
        }
        Command::Evaluate { gt, tracks, gate, motp_denominator, csv } => {
            let spec_path = gt.with_file_name(io::SCENE_FILE);
            let spec: Option<ScenarioSpec> = if spec_path.is_file() { Some(io::read_json(&spec_path)?) } else { None };
            let gt: Vec<GroundTruthFrame> = read_jsonl(&gt)?;
            let denom = match motp_denominator {
                Denominator::Gt => MotpDenominator::Gt,
                Denominator::Matches => MotpDenominator::Matches,
            };
            let mut rows = Vec::new();
            for path in &tracks {
                let lines: Vec<TrackLine> = read_jsonl(path)?;
                let r = evaluate_sequence(&gt, &group_track_lines(&lines), gate, denom)
                    .with_context(|| format!("evaluating {}", path.display()))?;
                rows.push(EvalRow {
                    tracker: tracker_name(path, &lines),
                    counts: r.counts,
                    fpr: r.fpr,
                    fnr: r.fnr,
                    idswr: r.idswr,
                    mota: r.mota,
                    motp: r.motp,
                });
            }
            if let Some(csv_path) = csv {
                let mut file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
                if let Some(spec) = spec {
                    writeln!(file, "# seed={}", spec.seed)?;
                }
                let mut w = csv::Writer::from_writer(file);
                w.write_record(["tracker", "fp", "fn", "idsw", "gt_total", "matches", "fpr", "fnr", "idswr", "mota", "motp"])?;
                for r in &rows {
                    let c = &r.counts;
                    w.write_record([
                        r.tracker.clone(),
                        c.fp.to_string(),
                        c.fn_.to_string(),
                        c.idsw.to_string(),
                        c.gt_total.to_string(),
                        c.matches.to_string(),
                        format!("{:.4}", r.fpr),
                        format!("{:.4}", r.fnr),
                        format!("{:.4}", r.idswr),
                        format!("{:.4}", r.mota),
                        format!("{:.4}", r.motp),
                    ])?;
                }
                w.flush()?;
            }
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::Ablate { scene, config, bev_params, pixel_params, train_seed, kalman_only, out } => {
            let cfg = resolve_config(config.as_deref())?;
            let logs = load_scene(&scene)?;
            let kalman = MotionSet::default();
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let bilstm = if kalman_only {
                None
            } else {
                Some(match (bev_params, pixel_params) {
                    (Some(b), Some(p)) => MotionSet {
                        bev: MotionModel::BiLstm(Arc::new(BiLstmPredictor::load(&b)?)),
                        pixel: MotionModel::BiLstm(Arc::new(BiLstmPredictor::load(&p)?)),
                    },
                    _ => {
                        let (bev, _) = train_motion(Space::Bev, train_seed, 6, None)?;
                        let (pixel, _) = train_motion(Space::Pixel, train_seed, 6, None)?;
                        bev.save(&out.join("motion_bev.json"))?;
                        pixel.save(&out.join("motion_pixel.json"))?;
                        MotionSet { bev: MotionModel::BiLstm(Arc::new(bev)), pixel: MotionModel::BiLstm(Arc::new(pixel)) }
                    }
                })
            };
            let variants = standard_variants(&cfg, &kalman, bilstm.as_ref());
            let table = run_ablation(&logs, &variants)?;
            write_table(&table, &out, "ablation")?;
            std::fs::write(out.join("resolved_config.toml"), cfg.to_toml())?;
            print!("{}", table.to_text());
        }
        Command::Plot { gt, tracks, gate, out } => {
            let gt: Vec<GroundTruthFrame> = read_jsonl(&gt)?;
            let mut panels = Vec::new();
            for path in &tracks {
                let lines: Vec<TrackLine> = read_jsonl(path)?;
                panels.push(PlotPanel { name: tracker_name(path, &lines), tracks: lines });
            }
            let art = emit_trajectory_plot(&panels, &gt, gate)?;
            art.write(&out)?;
            for p in &panels {
                println!("{}: {} gap runs", p.name, art.gap_count(&p.name));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    tracker: String,
    counts: ClearCounts,
    fpr: f64,
    fnr: f64,
    idswr: f64,
    mota: f64,
    motp: f64,
}

/// The `source` field of the first record, else the file stem.
fn tracker_name(path: &Path, lines: &[TrackLine]) -> String {
    lines
        .first()
        .map(|l| l.source.clone())
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn resolve_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

/// Scenario seeds for motion training start here so they never coincide
/// with the seeds of scenes being evaluated.
const MOTION_SEED_BASE: u64 = 10_000;

/// Trains on `scenes` scenario seeds per template, reports R² on three
/// further held-out seeds.
fn train_motion(space: Space, seed: u64, scenes: u64, epochs: Option<usize>) -> Result<(BiLstmPredictor, RegressionReport)> {
    if scenes == 0 {
        bail!("--scenes must be at least 1");
    }
    let calib = default_calibration();
    let first = MOTION_SEED_BASE + seed * 100;
    let (bev, pixel) = training_trajectories(first..first + scenes, 300, &calib)?;
    let (bev_test, pixel_test) = training_trajectories(first + scenes..first + scenes + 3, 300, &calib)?;
    let (train, test, mut cfg) = match space {
        Space::Bev => (bev, bev_test, BiLstmTrainConfig::bev(seed)),
        Space::Pixel => (pixel, pixel_test, BiLstmTrainConfig::pixel(calib.image_width, seed)),
    };
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let trained = train_bilstm(&train, &cfg)?;
    let report = evaluate_predictor(&trained.predictor, &test)?;
    Ok((trained.predictor, report))
}
