//! `bgaug` command line: dataset preparation, augmentation builds, preview
//! grids, pose labeling and evaluation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bgaug::augment::Mode;
use bgaug::background::BackgroundPool;
use bgaug::config::PhotoRanges;
use bgaug::constants::{
    BATCH_SIZE, FRAME_HEIGHT, FRAME_WIDTH, MASK_SOFTEN_SIGMA, STEPS_PER_EPOCH, VAL_FRACTION,
};
use bgaug::dataset::{self, ArchiveFormat, EpochPlan};
use bgaug::error::{Error, Result};
use bgaug::manifest::DatasetManifest;
use bgaug::metrics;
use bgaug::pose;

#[derive(Parser)]
#[command(name = "bgaug", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Aug,
    Bgaug,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Aug => Mode::Aug,
            ModeArg::Bgaug => Mode::BgAug,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Png,
    Packed,
}

impl From<FormatArg> for ArchiveFormat {
    fn from(f: FormatArg) -> ArchiveFormat {
        match f {
            FormatArg::Png => ArchiveFormat::Png,
            FormatArg::Packed => ArchiveFormat::Packed,
        }
    }
}

/// Seeds are accepted as decimal or 0x-prefixed hex.
fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    parsed.map_err(|_| format!("invalid seed '{s}'"))
}

#[derive(Subcommand)]
enum Command {
    /// Select the subject in each frame, prepare softened alpha masks, and
    /// emit an updated manifest.
    MaskPrep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Mask softening sigma in pixels.
        #[arg(long, default_value_t = MASK_SOFTEN_SIGMA)]
        sigma: f64,
        /// Disable mask softening entirely.
        #[arg(long)]
        no_soften: bool,
    },
    /// Index a background pool and report its statistics.
    PoolStats {
        #[arg(long, env = "BGAUG_POOL")]
        pool: PathBuf,
    },
    /// Build an augmented dataset archive.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, env = "BGAUG_POOL", required_if_eq("mode", "bgaug"))]
        pool: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_seed)]
        seed: u64,
        #[arg(long, value_enum, default_value = "bgaug")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        epochs: u32,
        #[arg(long, default_value_t = STEPS_PER_EPOCH)]
        steps: u32,
        #[arg(long, default_value_t = BATCH_SIZE)]
        batch: u32,
        #[arg(long, default_value_t = VAL_FRACTION)]
        split: f64,
        #[arg(long, default_value_t = 0, help = "worker threads (0 = all cores)")]
        workers: usize,
        /// TOML/JSON file overriding the photometric sampling ranges.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "packed")]
        format: FormatArg,
    },
    /// Write a grid PNG of one frame and n augmented variants.
    Preview {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, env = "BGAUG_POOL")]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_seed, default_value = "0")]
        seed: u64,
        #[arg(long, value_enum, default_value = "bgaug")]
        mode: ModeArg,
        #[arg(short = 'n', long, default_value_t = 5)]
        n: usize,
        /// Manifest entry to preview.
        #[arg(long, default_value_t = 0)]
        entry: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute relative-pose labels from mocap tracks.
    PoseDerive {
        /// CSV of frame_id, timestamp_s.
        #[arg(long)]
        frames: PathBuf,
        /// Drone track CSV: timestamp_s, px, py, pz, qx, qy, qz, qw.
        #[arg(long)]
        drone: PathBuf,
        /// Subject track CSV, same columns.
        #[arg(long)]
        subject: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Largest bracketing gap, in seconds, before a frame is dropped.
        #[arg(long, default_value_t = 0.05)]
        max_gap: f64,
    },
    /// Per-variable R^2 / MAE report from labels and predictions CSVs.
    EvalR2 {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Treat phi as a plain linear variable (no residual wrapping).
        #[arg(long)]
        phi_linear: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the deterministic middle-rows evaluation crops plus labels.
    CenterCrop {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_ranges(config: Option<&PathBuf>) -> Result<PhotoRanges> {
    match config {
        Some(path) => PhotoRanges::load(path),
        None => Ok(PhotoRanges::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MaskPrep {
            manifest,
            out,
            sigma,
            no_soften,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let sigma = if no_soften { 0.0 } else { sigma };
            let summary = dataset::mask_prep(&manifest, &out, sigma)?;
            println!(
                "prepared {} masks ({} entries without a usable person); manifest: {}",
                summary.prepared,
                summary.no_person,
                summary.manifest.display()
            );
        }
        Command::PoolStats { pool } => {
            let pool = BackgroundPool::load(&pool, FRAME_WIDTH, FRAME_HEIGHT)?;
            let (min_w, min_h, max_w, max_h) = pool.entries().iter().fold(
                (u32::MAX, u32::MAX, 0, 0),
                |(aw, ah, bw, bh), e| {
                    (aw.min(e.width), ah.min(e.height), bw.max(e.width), bh.max(e.height))
                },
            );
            println!(
                "entries: {}\nskipped: {}\nmin dimensions: {min_w}x{min_h}\nmax dimensions: {max_w}x{max_h}",
                pool.entries().len(),
                pool.skipped()
            );
        }
        Command::Augment {
            manifest,
            pool,
            out,
            seed,
            mode,
            epochs,
            steps,
            batch,
            split,
            workers,
            config,
            format,
        } => {
            let mode: Mode = mode.into();
            let manifest = DatasetManifest::load(&manifest)?;
            let ranges = load_ranges(config.as_ref())?;
            let pool = match (&pool, mode) {
                (Some(p), _) => Some(BackgroundPool::load(p, FRAME_WIDTH, FRAME_HEIGHT)?),
                (None, Mode::BgAug) => {
                    return Err(Error::Config(
                        "bgaug mode needs --pool or BGAUG_POOL".into(),
                    ))
                }
                (None, Mode::Aug) => None,
            };
            let plan = EpochPlan {
                seed,
                epochs,
                steps_per_epoch: steps,
                batch_size: batch,
                mode,
                split_fraction: split,
            };
            let (train, val) = dataset::split_train_val(manifest.entries.len(), split, seed)?;
            let source: &dyn bgaug::background::BackgroundSource = match &pool {
                Some(p) => p,
                None => &dataset_null_pool::NullPool,
            };
            let specs = dataset::build_epochs(
                &plan,
                &train,
                pool.as_ref().map(|p| p as &dyn bgaug::background::BackgroundSource),
                &ranges,
            )?;
            let store = dataset::FrameStore::load(&manifest, &train, mode)?;
            let workers = if workers == 0 {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            } else {
                workers
            };
            let summary = dataset::write_dataset(
                &plan,
                &specs,
                &store,
                source,
                &out,
                format.into(),
                workers,
                (train.len(), val.len()),
            )?;
            println!(
                "wrote {} samples ({:?}) to {} (train {}, val {}, ~{:.1} views/frame)\ndigest: {}",
                summary.samples,
                summary.format,
                out.display(),
                summary.train_size,
                summary.val_size,
                summary.samples as f64 / summary.train_size as f64,
                summary.content_digest
            );
        }
        Command::Preview {
            manifest,
            pool,
            out,
            seed,
            mode,
            n,
            entry,
            config,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let pool = BackgroundPool::load(&pool, FRAME_WIDTH, FRAME_HEIGHT)?;
            let ranges = load_ranges(config.as_ref())?;
            dataset::preview(&manifest, entry, mode.into(), seed, n, &pool, &ranges, &out)?;
            println!("wrote preview grid {}", out.display());
        }
        Command::PoseDerive {
            frames,
            drone,
            subject,
            out,
            max_gap,
        } => {
            let frames = pose::load_frames_csv(&frames)?;
            let drone_track = pose::load_track_csv(&drone)?;
            let subject_track = pose::load_track_csv(&subject)?;
            let summary = pose::resample_and_label(&frames, &drone_track, &subject_track, max_gap)?;
            pose::write_labels_csv(&out, &summary.labels)?;
            println!(
                "labeled {} frames, dropped {} (gap > {max_gap}s)",
                summary.labels.len(),
                summary.dropped
            );
        }
        Command::EvalR2 {
            labels,
            predictions,
            phi_linear,
            out,
        } => {
            let report = metrics::evaluate(&labels, &predictions, phi_linear)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::CenterCrop { manifest, out } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let count = dataset::center_crop_eval_prep(&manifest, &out)?;
            println!("wrote {count} evaluation crops to {}", out.display());
        }
    }
    Ok(())
}

/// Pool stand-in for Aug-mode builds; the pipeline never touches it.
mod dataset_null_pool {
    use bgaug::background::BackgroundSource;
    use bgaug::error::{Error, Result};
    use bgaug::imaging::Raster;

    pub struct NullPool;

    impl BackgroundSource for NullPool {
        fn len(&self) -> usize {
            0
        }
        fn background(&self, _: usize, _: (u32, u32)) -> Result<Raster> {
            Err(Error::Config("no background pool configured".into()))
        }
        fn crop_range(&self, _: usize) -> Result<(u32, u32)> {
            Err(Error::Config("no background pool configured".into()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
