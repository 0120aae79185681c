//! The replacement-background repository: index a directory of images once,
//! then deterministically sample frame-sized grayscale crops from it.
//!
//! Sampling draws exactly three values from its substream, in a frozen
//! order: entry index, crop x, crop y. That order is part of the
//! reproducibility contract.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use walkdir::WalkDir;

use crate::constants::SIZE_REJECT_DIVISOR;
use crate::error::{Error, Result};
use crate::imaging::{crop, resize_bilinear, Raster};
use crate::io;
use crate::rng::RngStream;

/// Default byte budget for the decoded-background cache.
pub const DEFAULT_CACHE_BUDGET: usize = 512 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

/// Abstracts where backgrounds come from, so the augmentation path can be
/// exercised against stubs.
pub trait BackgroundSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// The target-sized grayscale crop for a recorded (entry, crop origin).
    fn background(&self, entry: usize, crop_xy: (u32, u32)) -> Result<Raster>;
    /// Valid crop-origin range (inclusive) for an entry after cover-scaling.
    fn crop_range(&self, entry: usize) -> Result<(u32, u32)>;
}

/// An indexed directory of background images.
pub struct BackgroundPool {
    entries: Vec<PoolEntry>,
    target_w: u32,
    target_h: u32,
    skipped: usize,
    cache: Mutex<ScaledCache>,
}

impl BackgroundPool {
    /// Recursively index `root_dir`. Entries are sorted by relative path so
    /// the index order is identical across file systems; images smaller than
    /// a quarter of the target in either dimension are skipped and counted.
    pub fn load(root_dir: &Path, target_w: u32, target_h: u32) -> Result<Self> {
        if !root_dir.is_dir() {
            return Err(Error::Config(format!(
                "background pool {} is not a directory",
                root_dir.display()
            )));
        }
        let min_w = target_w / SIZE_REJECT_DIVISOR;
        let min_h = target_h / SIZE_REJECT_DIVISOR;
        let mut keyed: Vec<(PathBuf, PoolEntry)> = Vec::new();
        let mut skipped = 0usize;
        for item in WalkDir::new(root_dir).into_iter().filter_map(|e| e.ok()) {
            if !item.file_type().is_file() {
                continue;
            }
            let path = item.path();
            let Ok((width, height)) = io::image_dimensions(path) else {
                continue; // not a decodable image
            };
            if width < min_w || height < min_h {
                skipped += 1;
                continue;
            }
            let rel = path.strip_prefix(root_dir).unwrap_or(path).to_path_buf();
            keyed.push((
                rel,
                PoolEntry {
                    path: path.to_path_buf(),
                    width,
                    height,
                },
            ));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let entries: Vec<PoolEntry> = keyed.into_iter().map(|(_, e)| e).collect();
        if entries.is_empty() {
            return Err(Error::Config(format!(
                "background pool {} contains no usable images",
                root_dir.display()
            )));
        }
        Ok(BackgroundPool {
            entries,
            target_w,
            target_h,
            skipped,
            cache: Mutex::new(ScaledCache::new(DEFAULT_CACHE_BUDGET)),
        })
    }

    pub fn set_cache_budget(&self, bytes: usize) {
        self.cache.lock().unwrap().set_budget(bytes);
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn target(&self) -> (u32, u32) {
        (self.target_w, self.target_h)
    }

    /// Cover-scaled dimensions for an entry: the smallest bilinear resize
    /// preserving aspect ratio that still covers the target rectangle.
    fn scaled_dims(&self, entry: &PoolEntry) -> (u32, u32) {
        let s = f64::max(
            self.target_w as f64 / entry.width as f64,
            self.target_h as f64 / entry.height as f64,
        );
        let w = ((entry.width as f64 * s).round() as u32).max(self.target_w);
        let h = ((entry.height as f64 * s).round() as u32).max(self.target_h);
        (w, h)
    }

    /// Decode, grayscale and cover-scale an entry (cached).
    fn scaled(&self, index: usize) -> Result<Arc<Raster>> {
        if let Some(hit) = self.cache.lock().unwrap().get(index) {
            return Ok(hit);
        }
        let entry = &self.entries[index];
        let gray = io::load_grayscale(&entry.path)?;
        let (sw, sh) = self.scaled_dims(entry);
        let scaled = if (gray.width(), gray.height()) == (sw, sh) {
            gray
        } else {
            resize_bilinear(&gray, sw, sh)?
        };
        let scaled = Arc::new(scaled);
        self.cache.lock().unwrap().put(index, scaled.clone());
        Ok(scaled)
    }
}

impl BackgroundSource for BackgroundPool {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn background(&self, entry: usize, crop_xy: (u32, u32)) -> Result<Raster> {
        if entry >= self.entries.len() {
            return Err(Error::Argument(format!("pool entry {entry} out of range")));
        }
        let scaled = self.scaled(entry)?;
        crop(&scaled, crop_xy.0, crop_xy.1, self.target_w, self.target_h)
    }

    fn crop_range(&self, entry: usize) -> Result<(u32, u32)> {
        if entry >= self.entries.len() {
            return Err(Error::Argument(format!("pool entry {entry} out of range")));
        }
        let (sw, sh) = self.scaled_dims(&self.entries[entry]);
        Ok((sw - self.target_w, sh - self.target_h))
    }
}

/// Draw the (entry, crop origin) pair for one sample. Exactly three draws:
/// entry index, crop x, crop y.
pub fn sample_params(source: &dyn BackgroundSource, rng: &mut RngStream) -> Result<(usize, (u32, u32))> {
    if source.is_empty() {
        return Err(Error::Config("background pool is empty".into()));
    }
    let entry = rng.draw_uniform_int(0, source.len() as u64 - 1)? as usize;
    let (max_x, max_y) = source.crop_range(entry)?;
    let x = rng.draw_uniform_int(0, max_x as u64)? as u32;
    let y = rng.draw_uniform_int(0, max_y as u64)? as u32;
    Ok((entry, (x, y)))
}

/// Sample a target-sized grayscale background from the pool.
pub fn sample_background(source: &dyn BackgroundSource, rng: &mut RngStream) -> Result<Raster> {
    let (entry, crop_xy) = sample_params(source, rng)?;
    source.background(entry, crop_xy)
}

/// Decoded, cover-scaled backgrounds keyed by entry index; LRU-evicted to a
/// byte budget. Purely an accelerator: outputs never depend on its state.
struct ScaledCache {
    budget: usize,
    used: usize,
    map: HashMap<usize, Arc<Raster>>,
    order: Vec<usize>, // least recently used first
}

impl ScaledCache {
    fn new(budget: usize) -> Self {
        ScaledCache {
            budget,
            used: 0,
            map: HashMap::new(),
            order: Vec::new(),
        }
    }

    fn set_budget(&mut self, budget: usize) {
        self.budget = budget;
        self.evict();
    }

    fn touch(&mut self, key: usize) {
        if let Some(pos) = self.order.iter().position(|&k| k == key) {
            self.order.remove(pos);
        }
        self.order.push(key);
    }

    fn get(&mut self, key: usize) -> Option<Arc<Raster>> {
        let hit = self.map.get(&key).cloned();
        if hit.is_some() {
            self.touch(key);
        }
        hit
    }

    fn put(&mut self, key: usize, img: Arc<Raster>) {
        let size = img.pixels().len();
        if size > self.budget {
            return;
        }
        if self.map.insert(key, img).is_none() {
            self.used += size;
        }
        self.touch(key);
        self.evict();
    }

    fn evict(&mut self) {
        while self.used > self.budget && !self.order.is_empty() {
            let key = self.order.remove(0);
            if let Some(img) = self.map.remove(&key) {
                self.used -= img.pixels().len();
            }
        }
    }
}
