use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dynmap_core::dataio::{self, ColorBy, DynamicClasses, PoseFormat, VerdictWriter};
use dynmap_core::eval::{self, GtTag};
use dynmap_core::{Pipeline, PipelineConfig, RatioRule, SceneSpec, Sweep, SweepReport};

const EXIT_DATA: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "dynmap", version, about = "Dynamic point removal and static map building for spinning LiDAR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a scan sequence.
    Run(RunArgs),
    /// Score a verdict dump against Semantic-KITTI style labels.
    Eval(EvalArgs),
    /// Generate a synthetic sequence in KITTI layout.
    Synth(SynthArgs),
    /// Print the default pipeline configuration.
    Config,
}

#[derive(Args)]
struct RunArgs {
    /// Directory of `.bin` scans; file name order is sweep order.
    #[arg(long)]
    scans: PathBuf,
    #[arg(long)]
    poses: PathBuf,
    /// kitti | tum
    #[arg(long, default_value = "kitti")]
    pose_format: PoseFormat,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output-map PLY.
    #[arg(long)]
    out_map: PathBuf,
    /// Tracking-map PLY.
    #[arg(long)]
    out_tracking: Option<PathBuf>,
    /// Per-sweep JSON-lines report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-point verdict dump (CSV), input to `dynmap eval`.
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// label | class
    #[arg(long, default_value = "label")]
    color_by: ColorBy,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags that shadow config-file values.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    fore_back_threshold: Option<f64>,
    #[arg(long)]
    min_neighbors: Option<usize>,
    /// literal | reconciled
    #[arg(long)]
    ratio_rule: Option<RatioRule>,
    #[arg(long)]
    nonground_ratio_threshold: Option<f64>,
    #[arg(long)]
    ground_ratio_cutoff: Option<f64>,
    #[arg(long)]
    max_far_sweeps: Option<u32>,
    /// Voxel size of both maps.
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long)]
    downsample_cell: Option<f64>,
    #[arg(long)]
    bootstrap_map_points: Option<usize>,
    /// Report zero timings so report files are reproducible.
    #[arg(long)]
    no_timings: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let d = &mut cfg.detector;
        if let Some(v) = self.fore_back_threshold {
            d.fore_back_threshold = v;
        }
        if let Some(v) = self.min_neighbors {
            d.min_neighbors = v;
        }
        if let Some(v) = self.ratio_rule {
            d.ratio_rule = v;
        }
        if let Some(v) = self.nonground_ratio_threshold {
            d.nonground_ratio_threshold = v;
        }
        if let Some(v) = self.ground_ratio_cutoff {
            d.ground_ratio_cutoff = v;
        }
        if let Some(v) = self.max_far_sweeps {
            d.undetermined_max_far_sweeps = v;
        }
        if let Some(v) = self.voxel_size {
            cfg.tracking_map.voxel_size = v;
            cfg.output_map.voxel_size = v;
        }
        if let Some(v) = self.downsample_cell {
            cfg.downsample_cell = v;
        }
        if let Some(v) = self.bootstrap_map_points {
            cfg.bootstrap_map_points = v;
        }
        if self.no_timings {
            cfg.record_timings = false;
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    verdicts: PathBuf,
    /// Directory of `.label` files, in sweep order.
    #[arg(long)]
    labels: PathBuf,
    /// TOML list of semantic classes counted as dynamic.
    #[arg(long)]
    dynamic_classes: Option<PathBuf>,
    /// Also summarize stage timings from a run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    sweeps: u64,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let scans = dataio::list_files(&args.scans, "bin")?;
    let poses = dataio::read_poses(&args.poses, args.pose_format)?;
    if poses.len() < scans.len() {
        return Err(dynmap_core::Error::Format {
            path: args.poses.clone(),
            message: format!("{} poses for {} scans", poses.len(), scans.len()),
        }
        .into());
    }

    let mut report_out = args.report.as_deref().map(create).transpose()?;
    let mut verdict_out = match args.verdicts.as_deref() {
        Some(p) => Some(VerdictWriter::new(create(p)?)?),
        None => None,
    };
    let mut pipeline = Pipeline::new(cfg.clone())?;
    let mut reports: Vec<SweepReport> = Vec::with_capacity(scans.len());
    for (i, (scan, stamped)) in scans.iter().zip(&poses).enumerate() {
        let points = dataio::read_kitti_bin(scan)?;
        let sweep = Sweep::new(i as u64, points, cfg.lidar_pose(&stamped.pose));
        let outcome = pipeline
            .process_sweep(&sweep)
            .with_context(|| format!("while processing {}", scan.display()))?;
        if let Some(w) = report_out.as_mut() {
            writeln!(w, "{}", outcome.report.to_json_line())?;
        }
        if let Some(w) = verdict_out.as_mut() {
            w.write_outcome(i as u64, &outcome)?;
        }
        log::info!(
            "sweep {i}: {} pts, {} dynamic, {} undetermined pending",
            outcome.report.counts.processed,
            outcome.report.counts.dynamic,
            outcome.report.counts.undetermined_pending
        );
        reports.push(outcome.report);
    }
    let pending = pipeline.finish();
    if !pending.is_empty() {
        log::info!("{} undetermined points still pending at end of sequence", pending.len());
    }
    if let Some(mut w) = report_out {
        w.flush()?;
    }
    if let Some(w) = verdict_out {
        w.into_inner().flush()?;
    }
    dataio::write_ply(pipeline.output_map(), &args.out_map, args.color_by)?;
    if let Some(p) = &args.out_tracking {
        dataio::write_ply(pipeline.tracking_map(), p, args.color_by)?;
    }
    eprintln!(
        "{} sweeps; output-map {} points, tracking-map {} points",
        reports.len(),
        pipeline.output_map().len(),
        pipeline.tracking_map().len()
    );
    if let Ok(summary) = eval::timing_summary(&reports) {
        eprintln!("{summary}");
    }
    Ok(())
}

fn read_reports(path: &Path) -> Result<Vec<SweepReport>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                dynmap_core::Error::FormatAt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                }
                .into()
            })
        })
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let classes = match &args.dynamic_classes {
        Some(p) => DynamicClasses::load(p)?,
        None => DynamicClasses::default(),
    };
    let table = dataio::read_verdicts(&args.verdicts)?;
    let label_files = dataio::list_files(&args.labels, "label")?;
    let mut cache: HashMap<u64, Vec<u32>> = HashMap::new();
    let mut scored: Vec<(Option<dynmap_core::PointClass>, GtTag)> = Vec::with_capacity(table.len());
    for (&(sweep, point), &verdict) in &table {
        let labels = match cache.entry(sweep) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let Some(path) = label_files.get(sweep as usize) else {
                    return Err(dynmap_core::Error::Input(format!(
                        "verdicts reference sweep {sweep} but {} has only {} label files",
                        args.labels.display(),
                        label_files.len()
                    ))
                    .into());
                };
                e.insert(dataio::read_semantic_labels(path, None)?)
            }
        };
        let Some(&label) = labels.get(point as usize) else {
            return Err(dynmap_core::Error::Input(format!(
                "sweep {sweep} point {point} is beyond its label file ({} labels)",
                labels.len()
            ))
            .into());
        };
        scored.push((Some(eval::settle(verdict)), classes.tag(label)));
    }
    let result = eval::score(scored)?;
    let timing = match &args.report {
        Some(p) => Some(eval::timing_summary(&read_reports(p)?)?),
        None => None,
    };
    if args.json {
        let v = serde_json::json!({ "pr_rr": result, "timing_ms": timing });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("{result}");
        if let Some(t) = timing {
            println!();
            println!("{t}");
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SceneSpec::load(&args.scene)?;
    spec.write_dataset(args.sweeps, &args.out)?;
    eprintln!("wrote {} sweeps to {}", args.sweeps, args.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<dynmap_core::Error>()) {
        Some(dynmap_core::Error::Config(_)) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Config => {
            print!("{}", PipelineConfig::default().to_toml_string());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
