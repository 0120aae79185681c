//! Dataset builds: train/validation split, epoch planning, parallel sample
//! rendering, archive writers, preview grids, mask preparation and the
//! deterministic evaluation crop.
//!
//! Determinism contract: every sample's parameters come from substreams
//! keyed by (seed, epoch, sample index), so output bytes are identical for
//! any worker count. Samples are always written in (epoch, index) order.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{augment_sample, sample_params, AugParams, Mode};
use crate::background::BackgroundSource;
use crate::config::PhotoRanges;
use crate::constants::{CROP_HEIGHT, EVAL_ROW_OFFSET, FRAME_HEIGHT, FRAME_WIDTH};
use crate::error::{Error, Result};
use crate::imaging::{crop, Raster};
use crate::io;
use crate::manifest::{DatasetManifest, Label};
use crate::mask::{decode_mask, load_detections, select_primary_person, soften_mask, AlphaMask};
use crate::rng::{derive_substream, Purpose};

/// Substream index used for the train/validation shuffle. Lives outside the
/// per-sample index space (which is epoch-relative and starts at 0), so the
/// split never shares a stream with frame selection.
const SPLIT_STREAM_INDEX: u64 = u64::MAX;

/// A fully-specified dataset build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochPlan {
    pub seed: u64,
    pub epochs: u32,
    pub steps_per_epoch: u32,
    pub batch_size: u32,
    pub mode: Mode,
    pub split_fraction: f64,
}

impl EpochPlan {
    pub fn samples_per_epoch(&self) -> u64 {
        self.steps_per_epoch as u64 * self.batch_size as u64
    }

    pub fn total_samples(&self) -> u64 {
        self.samples_per_epoch() * self.epochs as u64
    }
}

/// Deterministic shuffle, then the first ceil((1 - fraction) * N) entries
/// train and the rest validate. Disjoint and exhaustive by construction.
pub fn split_train_val(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Data("cannot split an empty manifest".into()));
    }
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction {fraction} must lie in (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_substream(seed, 0, SPLIT_STREAM_INDEX, Purpose::Split);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.draw_uniform_int(0, i as u64)? as usize;
        order.swap(i, j);
    }
    let n_train = ((1.0 - fraction) * n as f64).ceil() as usize;
    let val = order.split_off(n_train.min(n));
    Ok((order, val))
}

/// One planned sample: which train frame it comes from and how it is
/// augmented.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    pub epoch: u32,
    pub index: u64,
    /// Index into the manifest entry list (not the train list).
    pub manifest_entry: usize,
    pub params: AugParams,
}

/// Plan every sample of every epoch. Frame selection draws one value from
/// the (epoch, index, Split) substream; augmentation parameters come from
/// the sample's own substreams.
pub fn build_epochs(
    plan: &EpochPlan,
    train: &[usize],
    source: Option<&dyn BackgroundSource>,
    ranges: &PhotoRanges,
) -> Result<Vec<SampleSpec>> {
    if train.is_empty() {
        return Err(Error::Data("empty training list".into()));
    }
    let mut specs = Vec::with_capacity(plan.total_samples() as usize);
    for epoch in 0..plan.epochs {
        for index in 0..plan.samples_per_epoch() {
            let mut pick = derive_substream(plan.seed, epoch as u64, index, Purpose::Split);
            let train_pos = pick.draw_uniform_int(0, train.len() as u64 - 1)? as usize;
            let params = sample_params(plan.mode, source, ranges, plan.seed, epoch as u64, index)?;
            specs.push(SampleSpec {
                epoch,
                index,
                manifest_entry: train[train_pos],
                params,
            });
        }
    }
    Ok(specs)
}

/// Frames (and masks, when required) loaded once and shared by the render
/// workers.
pub struct FrameStore {
    frames: Vec<Option<Raster>>,
    masks: Vec<Option<AlphaMask>>,
    labels: Vec<Label>,
}

impl FrameStore {
    /// Load every manifest entry listed in `needed`. Masks are loaded only
    /// in BgAug mode, where missing ones are a hard error (reported all at
    /// once, with the offending entries listed).
    pub fn load(manifest: &DatasetManifest, needed: &[usize], mode: Mode) -> Result<Self> {
        if mode == Mode::BgAug {
            let missing: Vec<usize> = needed
                .iter()
                .copied()
                .filter(|&i| manifest.entries[i].mask.is_none())
                .collect();
            if !missing.is_empty() {
                let names: Vec<String> = missing
                    .iter()
                    .take(10)
                    .map(|&i| manifest.entries[i].frame.display().to_string())
                    .collect();
                return Err(Error::Data(format!(
                    "bgaug build requires masks; {} entries missing them (e.g. {})",
                    missing.len(),
                    names.join(", ")
                )));
            }
        }
        let n = manifest.entries.len();
        let mut frames: Vec<Option<Raster>> = (0..n).map(|_| None).collect();
        let mut masks: Vec<Option<AlphaMask>> = (0..n).map(|_| None).collect();
        for &i in needed {
            let entry = &manifest.entries[i];
            let frame = io::load_grayscale(&manifest.frame_path(entry))?;
            if (frame.width(), frame.height()) != (FRAME_WIDTH, FRAME_HEIGHT) {
                return Err(Error::Data(format!(
                    "{}: frame is {}x{}, expected {FRAME_WIDTH}x{FRAME_HEIGHT}",
                    entry.frame.display(),
                    frame.width(),
                    frame.height()
                )));
            }
            if mode == Mode::BgAug {
                let path = manifest.mask_path(entry).expect("checked above");
                masks[i] = Some(decode_mask(&path, FRAME_WIDTH, FRAME_HEIGHT)?);
            }
            frames[i] = Some(frame);
        }
        let labels = manifest.entries.iter().map(|e| e.label.clone()).collect();
        Ok(FrameStore {
            frames,
            masks,
            labels,
        })
    }

    fn frame(&self, i: usize) -> &Raster {
        self.frames[i].as_ref().expect("frame preloaded")
    }

    fn mask(&self, i: usize) -> Option<&AlphaMask> {
        self.masks[i].as_ref()
    }

    fn label(&self, i: usize) -> &Label {
        &self.labels[i]
    }
}

/// A rendered sample ready for an archive writer.
pub struct RenderedSample {
    pub spec: SampleSpec,
    pub image: Raster,
    pub label: Label,
}

/// Render a batch of specs in parallel. Output order equals spec order
/// regardless of scheduling.
pub fn render_samples(
    specs: &[SampleSpec],
    store: &FrameStore,
    source: &dyn BackgroundSource,
) -> Result<Vec<RenderedSample>> {
    specs
        .par_iter()
        .map(|spec| {
            let frame = store.frame(spec.manifest_entry);
            let alpha = store.mask(spec.manifest_entry);
            let image = augment_sample(frame, alpha, source, &spec.params)?;
            Ok(RenderedSample {
                spec: spec.clone(),
                image,
                label: store.label(spec.manifest_entry).clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchiveFormat {
    Png,
    Packed,
}

/// Build summary, also persisted as the archive's manifest JSON.
#[derive(Debug, Serialize, Deserialize)]
pub struct BuildSummary {
    pub plan: EpochPlan,
    pub format: ArchiveFormat,
    pub samples: u64,
    pub train_size: usize,
    pub val_size: usize,
    /// SHA-256 over all sample pixels and float32 labels, in sample order;
    /// independent of the on-disk format.
    pub content_digest: String,
}

fn sample_id(epoch: u32, index: u64) -> String {
    format!("e{epoch:03}_s{index:06}")
}

const PACKED_MAGIC: &[u8; 4] = b"BGA1";

/// Incremental archive writer; samples must be appended in order.
enum ArchiveWriter {
    Png {
        out_dir: PathBuf,
        labels: csv::Writer<std::fs::File>,
    },
    Packed {
        file: std::io::BufWriter<std::fs::File>,
        path: PathBuf,
        count: u32,
        dims: Option<(u32, u32)>,
    },
}

impl ArchiveWriter {
    fn create(format: ArchiveFormat, out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        match format {
            ArchiveFormat::Png => {
                let labels_path = out_dir.join("labels.csv");
                let mut labels = csv::Writer::from_path(&labels_path)
                    .map_err(|e| Error::Data(format!("{}: {e}", labels_path.display())))?;
                labels
                    .write_record(["frame_id", "x", "y", "phi"])
                    .map_err(|e| Error::Data(e.to_string()))?;
                Ok(ArchiveWriter::Png {
                    out_dir: out_dir.to_path_buf(),
                    labels,
                })
            }
            ArchiveFormat::Packed => {
                let path = out_dir.join("data.bin");
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut writer = ArchiveWriter::Packed {
                    file: std::io::BufWriter::new(file),
                    path,
                    count: 0,
                    dims: None,
                };
                // header placeholder; count is patched on finish
                writer.write_packed_header(0, 0, 0)?;
                Ok(writer)
            }
        }
    }

    fn write_packed_header(&mut self, count: u32, w: u16, h: u16) -> Result<()> {
        if let ArchiveWriter::Packed { file, path, .. } = self {
            file.write_all(PACKED_MAGIC)
                .and_then(|_| file.write_all(&count.to_le_bytes()))
                .and_then(|_| file.write_all(&w.to_le_bytes()))
                .and_then(|_| file.write_all(&h.to_le_bytes()))
                .map_err(|e| Error::io(&*path, e))?;
        }
        Ok(())
    }

    fn append(&mut self, sample: &RenderedSample) -> Result<()> {
        let id = sample_id(sample.spec.epoch, sample.spec.index);
        match self {
            ArchiveWriter::Png { out_dir, labels } => {
                let path = out_dir.join(format!("{id}.png"));
                io::save_grayscale(&path, &sample.image)?;
                labels
                    .write_record([
                        id,
                        format!("{}", sample.label.x as f32),
                        format!("{}", sample.label.y as f32),
                        format!("{}", sample.label.phi as f32),
                    ])
                    .map_err(|e| Error::Data(e.to_string()))?;
            }
            ArchiveWriter::Packed {
                file,
                path,
                count,
                dims,
            } => {
                let d = (sample.image.width(), sample.image.height());
                match dims {
                    None => *dims = Some(d),
                    Some(prev) if *prev != d => {
                        return Err(Error::Data(format!(
                            "inconsistent sample dimensions: {prev:?} then {d:?}"
                        )))
                    }
                    _ => {}
                }
                file.write_all(sample.image.pixels())
                    .and_then(|_| file.write_all(&(sample.label.x as f32).to_le_bytes()))
                    .and_then(|_| file.write_all(&(sample.label.y as f32).to_le_bytes()))
                    .and_then(|_| file.write_all(&(sample.label.phi as f32).to_le_bytes()))
                    .map_err(|e| Error::io(&*path, e))?;
                *count += 1;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self {
            ArchiveWriter::Png { mut labels, .. } => {
                labels.flush().map_err(|e| Error::Data(e.to_string()))
            }
            ArchiveWriter::Packed {
                file,
                path,
                count,
                dims,
            } => {
                let (w, h) = dims.unwrap_or((0, 0));
                let mut inner = file
                    .into_inner()
                    .map_err(|e| Error::io(&path, e.into_error()))?;
                use std::io::Seek;
                inner
                    .seek(std::io::SeekFrom::Start(0))
                    .and_then(|_| inner.write_all(PACKED_MAGIC))
                    .and_then(|_| inner.write_all(&count.to_le_bytes()))
                    .and_then(|_| inner.write_all(&(w as u16).to_le_bytes()))
                    .and_then(|_| inner.write_all(&(h as u16).to_le_bytes()))
                    .map_err(|e| Error::io(&path, e))
            }
        }
    }
}

/// Render the planned samples with `workers` threads and write the archive,
/// the `params.jsonl` sidecar and a `manifest.json` summary into `out_dir`.
pub fn write_dataset(
    plan: &EpochPlan,
    specs: &[SampleSpec],
    store: &FrameStore,
    source: &dyn BackgroundSource,
    out_dir: &Path,
    format: ArchiveFormat,
    workers: usize,
    split_sizes: (usize, usize),
) -> Result<BuildSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let mut writer = ArchiveWriter::create(format, out_dir)?;
    let params_path = out_dir.join("params.jsonl");
    let mut params_file = std::io::BufWriter::new(
        std::fs::File::create(&params_path).map_err(|e| Error::io(&params_path, e))?,
    );
    let mut digest = Sha256::new();

    // Render in bounded chunks: parallel inside a chunk, sequential writes.
    const CHUNK: usize = 1024;
    for chunk in specs.chunks(CHUNK) {
        let rendered = pool.install(|| render_samples(chunk, store, source))?;
        for sample in &rendered {
            writer.append(sample)?;
            digest.update(sample.image.pixels());
            digest.update((sample.label.x as f32).to_le_bytes());
            digest.update((sample.label.y as f32).to_le_bytes());
            digest.update((sample.label.phi as f32).to_le_bytes());
            let line = serde_json::json!({
                "id": sample_id(sample.spec.epoch, sample.spec.index),
                "entry": sample.spec.manifest_entry,
                "params": sample.spec.params,
            });
            writeln!(params_file, "{line}").map_err(|e| Error::io(&params_path, e))?;
        }
    }
    writer.finish()?;
    params_file.flush().map_err(|e| Error::io(&params_path, e))?;

    let summary = BuildSummary {
        plan: plan.clone(),
        format,
        samples: specs.len() as u64,
        train_size: split_sizes.0,
        val_size: split_sizes.1,
        content_digest: format!("{:x}", digest.finalize()),
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(summary)
}

/// Read back a packed archive: (width, height, samples of (pixels, label)).
pub fn read_packed(path: &Path) -> Result<(u32, u32, Vec<(Vec<u8>, Label)>)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.len() < 12 || &data[0..4] != PACKED_MAGIC {
        return Err(Error::Data(format!("{}: not a packed archive", path.display())));
    }
    let count = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let w = u16::from_le_bytes(data[8..10].try_into().unwrap()) as u32;
    let h = u16::from_le_bytes(data[10..12].try_into().unwrap()) as u32;
    let stride = (w as usize) * (h as usize) + 12;
    if data.len() != 12 + count * stride {
        return Err(Error::Data(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            12 + count * stride,
            data.len()
        )));
    }
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let base = 12 + i * stride;
        let px = data[base..base + stride - 12].to_vec();
        let f = |o: usize| {
            f32::from_le_bytes(data[base + stride - 12 + o..base + stride - 8 + o].try_into().unwrap())
        };
        samples.push((
            px,
            Label {
                x: f(0) as f64,
                y: f(4) as f64,
                phi: f(8) as f64,
            },
        ));
    }
    Ok((w, h, samples))
}

/// Summary of a mask-preparation run.
#[derive(Debug, Serialize)]
pub struct MaskPrepSummary {
    pub prepared: usize,
    pub no_person: usize,
    pub manifest: PathBuf,
}

/// Run detection ingest over a manifest: select the subject in each frame,
/// binarize and (optionally) soften its mask, persist the matte as PNG plus
/// the selected detection record, and emit an updated manifest.
pub fn mask_prep(
    manifest: &DatasetManifest,
    out_dir: &Path,
    soften_sigma: f64,
) -> Result<MaskPrepSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = manifest.entries.clone();
    let mut prepared = 0usize;
    let mut no_person = 0usize;
    for entry in &mut entries {
        let Some(det_path) = manifest.detections_path(entry) else {
            no_person += 1;
            continue;
        };
        let detections = load_detections(&det_path)?;
        let selected = match entry.override_person_index {
            Some(i) => detections.get(i).ok_or_else(|| {
                Error::Data(format!(
                    "{}: override_person_index {i} out of range",
                    det_path.display()
                ))
            })?,
            None => match select_primary_person(&detections) {
                Some(d) => d,
                None => {
                    no_person += 1;
                    continue;
                }
            },
        };
        let mask_file = det_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(&selected.mask);
        let alpha = decode_mask(&mask_file, FRAME_WIDTH, FRAME_HEIGHT)?;
        let alpha = soften_mask(&alpha, soften_sigma)?;
        let stem = entry
            .frame
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".into());
        let mask_out = out_dir.join(format!("{stem}_mask.png"));
        io::save_grayscale(&mask_out, &alpha.to_raster())?;
        let det_out = out_dir.join(format!("{stem}_det.json"));
        std::fs::write(
            &det_out,
            serde_json::to_string_pretty(selected).expect("detection serializes"),
        )
        .map_err(|e| Error::io(&det_out, e))?;
        // relative to the output manifest's directory
        entry.mask = Some(PathBuf::from(format!("{stem}_mask.png")));
        prepared += 1;
    }
    let out_manifest_path = out_dir.join("manifest.json");
    // rebase: frames stay where they were, masks are absolute under out_dir
    let abs_frame_dir = manifest.base_dir().join(&manifest.frame_dir);
    let out_manifest = DatasetManifest::new(abs_frame_dir, entries, out_dir.to_path_buf());
    out_manifest.save(&out_manifest_path)?;
    Ok(MaskPrepSummary {
        prepared,
        no_person,
        manifest: out_manifest_path,
    })
}

/// Write the deterministic evaluation set: the middle rows of every frame
/// plus a labels CSV. No augmentation.
pub fn center_crop_eval_prep(manifest: &DatasetManifest, out_dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let labels_path = out_dir.join("labels.csv");
    let mut labels = csv::Writer::from_path(&labels_path)
        .map_err(|e| Error::Data(format!("{}: {e}", labels_path.display())))?;
    labels
        .write_record(["frame_id", "x", "y", "phi"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for entry in &manifest.entries {
        let frame = io::load_grayscale(&manifest.frame_path(entry))?;
        if (frame.width(), frame.height()) != (FRAME_WIDTH, FRAME_HEIGHT) {
            return Err(Error::Data(format!(
                "{}: frame is {}x{}, expected {FRAME_WIDTH}x{FRAME_HEIGHT}",
                entry.frame.display(),
                frame.width(),
                frame.height()
            )));
        }
        let cropped = crop(&frame, 0, EVAL_ROW_OFFSET, FRAME_WIDTH, CROP_HEIGHT)?;
        let stem = entry
            .frame
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".into());
        io::save_grayscale(&out_dir.join(format!("{stem}.png")), &cropped)?;
        labels
            .write_record([
                stem,
                format!("{:.9}", entry.label.x),
                format!("{:.9}", entry.label.y),
                format!("{:.9}", entry.label.phi),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    labels.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(manifest.entries.len())
}

/// Compose the figure-style preview: the original frame's middle crop plus
/// `n` augmented variants side by side.
pub fn preview(
    manifest: &DatasetManifest,
    entry_index: usize,
    mode: Mode,
    seed: u64,
    n: usize,
    source: &dyn BackgroundSource,
    ranges: &PhotoRanges,
    out_path: &Path,
) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("preview needs n >= 1 variants".into()));
    }
    let entry = manifest
        .entries
        .get(entry_index)
        .ok_or_else(|| Error::Argument(format!("manifest entry {entry_index} out of range")))?;
    let frame = io::load_grayscale(&manifest.frame_path(entry))?;
    let alpha = match (mode, manifest.mask_path(entry)) {
        (Mode::BgAug, Some(path)) => Some(decode_mask(&path, frame.width(), frame.height())?),
        (Mode::BgAug, None) => {
            return Err(Error::Data(format!(
                "{}: bgaug preview requires a mask",
                entry.frame.display()
            )))
        }
        (Mode::Aug, _) => None,
    };
    let mut tiles = Vec::with_capacity(n + 1);
    tiles.push(crop(&frame, 0, EVAL_ROW_OFFSET, frame.width(), CROP_HEIGHT)?);
    for k in 0..n {
        let params = sample_params(mode, Some(source), ranges, seed, 0, k as u64)?;
        tiles.push(augment_sample(&frame, alpha.as_ref(), source, &params)?);
    }
    let tile_w = tiles[0].width() as usize;
    let tile_h = tiles[0].height() as usize;
    let grid_w = tile_w * tiles.len();
    let mut pixels = vec![0u8; grid_w * tile_h];
    for (t, tile) in tiles.iter().enumerate() {
        for row in 0..tile_h {
            let src = &tile.pixels()[row * tile_w..(row + 1) * tile_w];
            let dst = row * grid_w + t * tile_w;
            pixels[dst..dst + tile_w].copy_from_slice(src);
        }
    }
    io::save_grayscale(out_path, &Raster::new(grid_w as u32, tile_h as u32, pixels)?)
}
