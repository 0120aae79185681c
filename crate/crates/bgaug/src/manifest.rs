//! Dataset manifests: the JSON index tying frames, masks, detections and
//! labels together. All paths inside a manifest are relative to the
//! manifest file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Label {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    pub label: Label,
    pub subject_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub override_person_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub frame_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub const VERSION: u32 = 1;

    pub fn new(frame_dir: PathBuf, entries: Vec<ManifestEntry>, base_dir: PathBuf) -> Self {
        DatasetManifest {
            version: Self::VERSION,
            frame_dir,
            entries,
            base_dir,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_slice(&data)
            .map_err(|e| Error::Data(format!("{}: invalid manifest: {e}", path.display())))?;
        if manifest.version != Self::VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                manifest.version
            )));
        }
        if manifest.entries.is_empty() {
            return Err(Error::Data(format!("{}: manifest has no entries", path.display())));
        }
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn frame_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&self.frame_dir).join(&entry.frame)
    }

    pub fn mask_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.mask.as_ref().map(|m| self.base_dir.join(m))
    }

    pub fn detections_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.detections.as_ref().map(|d| self.base_dir.join(d))
    }

    /// Entries (by index) that are missing a mask; BgAug builds require an
    /// empty result.
    pub fn entries_missing_masks(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.mask.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}
