//! Detection ingest and alpha-matte preparation: pick the subject among the
//! per-frame detections, binarize its segmentation mask, optionally soften
//! the seam with a Gaussian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, FloatPlane, Raster};
use crate::io;

/// One recognized object in a frame, as produced by an external segmentation
/// model and stored in the per-frame detections JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_label: String,
    pub score: f64,
    /// (x0, y0, w, h) in pixels.
    pub bbox: [u32; 4],
    /// Path to the object's binary mask image, relative to the detections file.
    pub mask: String,
}

impl Detection {
    pub fn bbox_area(&self) -> u64 {
        self.bbox[2] as u64 * self.bbox[3] as u64
    }
}

/// Per-pixel foreground opacity in [0, 1]; 1 keeps the frame pixel, 0 takes
/// the replacement background.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMask {
    plane: FloatPlane<f32>,
}

impl AlphaMask {
    pub fn new(plane: FloatPlane<f32>) -> Result<Self> {
        if plane.values().iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Argument("alpha values must lie in [0, 1]".into()));
        }
        Ok(AlphaMask { plane })
    }

    pub fn width(&self) -> u32 {
        self.plane.width()
    }

    pub fn height(&self) -> u32 {
        self.plane.height()
    }

    pub fn alpha(&self) -> &[f32] {
        self.plane.values()
    }

    /// Encode as an 8-bit grayscale image, value = round(alpha * 255).
    pub fn to_raster(&self) -> Raster {
        let scaled: Vec<f32> = self.plane.values().iter().map(|&a| a * 255.0).collect();
        FloatPlane::new(self.width(), self.height(), scaled)
            .expect("dimensions preserved")
            .quantize()
    }
}

/// The detection with class "person" and the largest bounding box; ties go
/// to the higher score, then to the earlier list position. `None` when no
/// person is present.
pub fn select_primary_person(detections: &[Detection]) -> Option<&Detection> {
    let mut best: Option<&Detection> = None;
    for d in detections.iter().filter(|d| d.class_label == "person") {
        // Strictly-greater replacement keeps the earliest entry on full ties.
        let wins = best.is_none_or(|b| {
            d.bbox_area()
                .cmp(&b.bbox_area())
                .then(d.score.partial_cmp(&b.score).unwrap_or(std::cmp::Ordering::Equal))
                .is_gt()
        });
        if wins {
            best = Some(d);
        }
    }
    best
}

/// Load detections from a per-frame JSON array.
pub fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&data)
        .map_err(|e| Error::Data(format!("{}: invalid detections JSON: {e}", path.display())))
}

/// Decode a mask image into a strictly binary alpha matte: pixel >= 128
/// becomes 1.0, anything below becomes 0.0.
pub fn decode_mask(mask_path: &Path, frame_w: u32, frame_h: u32) -> Result<AlphaMask> {
    let img = io::load_grayscale(mask_path)?;
    if img.width() != frame_w || img.height() != frame_h {
        return Err(Error::Data(format!(
            "{}: mask is {}x{}, frame is {frame_w}x{frame_h}",
            mask_path.display(),
            img.width(),
            img.height()
        )));
    }
    let alpha: Vec<f32> = img
        .pixels()
        .iter()
        .map(|&p| if p >= 128 { 1.0 } else { 0.0 })
        .collect();
    AlphaMask::new(FloatPlane::new(frame_w, frame_h, alpha)?)
}

/// Gaussian-soften the matte seam. Computed in f64 then clamped back to
/// [0, 1]; sigma == 0 is the identity.
pub fn soften_mask(mask: &AlphaMask, sigma: f64) -> Result<AlphaMask> {
    if sigma < 0.0 {
        return Err(Error::Argument(format!("negative soften sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(mask.clone());
    }
    let wide = FloatPlane::<f64>::new(
        mask.width(),
        mask.height(),
        mask.alpha().iter().map(|&a| a as f64).collect(),
    )?;
    let blurred = gaussian_blur(&wide, sigma)?;
    let clamped: Vec<f32> = blurred
        .values()
        .iter()
        .map(|&v| v.clamp(0.0, 1.0) as f32)
        .collect();
    AlphaMask::new(FloatPlane::new(mask.width(), mask.height(), clamped)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(class: &str, w: u32, h: u32, score: f64) -> Detection {
        Detection {
            class_label: class.into(),
            score,
            bbox: [0, 0, w, h],
            mask: "m.png".into(),
        }
    }

    #[test]
    fn selects_largest_person_not_largest_object() {
        let ds = vec![
            det("person", 10, 10, 0.9),
            det("person", 20, 20, 0.8),
            det("chair", 30, 30, 0.99),
        ];
        let sel = select_primary_person(&ds).unwrap();
        assert_eq!(sel.bbox_area(), 400);
    }

    #[test]
    fn empty_list_gives_none() {
        assert!(select_primary_person(&[]).is_none());
        assert!(select_primary_person(&[det("chair", 5, 5, 1.0)]).is_none());
    }

    #[test]
    fn tie_breaks_by_score_then_position() {
        // Exhaustive over permutations of two equal-area persons.
        let a = det("person", 10, 10, 0.7);
        let b = det("person", 10, 10, 0.9);
        for perm in [vec![a.clone(), b.clone()], vec![b.clone(), a.clone()]] {
            let sel = select_primary_person(&perm).unwrap();
            assert_eq!(sel.score, 0.9);
        }
        // Equal area and score: earliest position wins.
        let c = det("person", 10, 10, 0.5);
        let mut d = det("person", 10, 10, 0.5);
        d.mask = "second.png".into();
        let both = [c, d];
        let sel = select_primary_person(&both).unwrap();
        assert_eq!(sel.mask, "m.png");
    }

    #[test]
    fn decode_thresholds_at_128() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let img = Raster::new(4, 1, vec![0, 127, 128, 255]).unwrap();
        io::save_grayscale(&path, &img).unwrap();
        let mask = decode_mask(&path, 4, 1).unwrap();
        assert_eq!(mask.alpha(), &[0.0, 0.0, 1.0, 1.0]);
        assert!(decode_mask(&path, 4, 2).is_err());
    }

    #[test]
    fn decode_checkerboard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.png");
        let px: Vec<u8> = (0..16)
            .map(|i| if (i / 4 + i % 4) % 2 == 0 { 255 } else { 0 })
            .collect();
        io::save_grayscale(&path, &Raster::new(4, 4, px.clone()).unwrap()).unwrap();
        let mask = decode_mask(&path, 4, 4).unwrap();
        for (a, p) in mask.alpha().iter().zip(&px) {
            assert_eq!(*a, if *p >= 128 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn mask_raster_round_trip_binary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let px: Vec<u8> = (0..25).map(|i| if i % 3 == 0 { 255 } else { 0 }).collect();
        io::save_grayscale(&path, &Raster::new(5, 5, px.clone()).unwrap()).unwrap();
        let mask = decode_mask(&path, 5, 5).unwrap();
        assert_eq!(mask.to_raster().pixels(), &px[..]);
    }

    #[test]
    fn soften_constant_and_zero_sigma() {
        let ones = AlphaMask::new(FloatPlane::filled(8, 8, 1.0)).unwrap();
        let soft = soften_mask(&ones, 1.0).unwrap();
        for &a in soft.alpha() {
            assert!((a - 1.0).abs() < 1e-6);
        }
        let same = soften_mask(&ones, 0.0).unwrap();
        assert_eq!(same.alpha(), ones.alpha());
        assert!(soften_mask(&ones, -0.5).is_err());
    }

    #[test]
    fn soften_step_edge_hits_half() {
        // 1-D blurred step: value at the first column of the high side is
        // sum of kernel weights over taps landing in the high half. For a
        // step at the column boundary this is ~0.5 (erf oracle).
        let w = 32;
        let alpha: Vec<f32> = (0..w * 8)
            .map(|i| if (i % w) >= w / 2 { 1.0 } else { 0.0 })
            .collect();
        let mask = AlphaMask::new(FloatPlane::new(w, 8, alpha).unwrap()).unwrap();
        let soft = soften_mask(&mask, 1.0).unwrap();
        // Midpoint between the last 0 column and first 1 column.
        let left = soft.alpha()[(4 * w + w / 2 - 1) as usize];
        let right = soft.alpha()[(4 * w + w / 2) as usize];
        let at_step = 0.5 * (left + right);
        assert!((at_step - 0.5).abs() < 0.02, "step value {at_step}");
    }

    #[test]
    fn soften_commutes_with_inversion() {
        let mut alpha = vec![0.0f32; 16 * 16];
        for y in 4..12 {
            for x in 6..10 {
                alpha[y * 16 + x] = 1.0;
            }
        }
        let m = AlphaMask::new(FloatPlane::new(16, 16, alpha.clone()).unwrap()).unwrap();
        let inv = AlphaMask::new(
            FloatPlane::new(16, 16, alpha.iter().map(|a| 1.0 - a).collect()).unwrap(),
        )
        .unwrap();
        let sm = soften_mask(&m, 1.0).unwrap();
        let sinv = soften_mask(&inv, 1.0).unwrap();
        for (a, b) in sm.alpha().iter().zip(sinv.alpha()) {
            assert!((a + b - 1.0).abs() < 1e-6);
        }
    }
}
