//! The three-step augmentation pipeline: background randomization, pitch
//! augmentation, photometric augmentation.
//!
//! Every random decision is materialized into [`AugParams`] before any pixel
//! is touched; applying the same params twice yields bit-identical output.
//! The photometric order is frozen: exposure, gamma, dynamic-range
//! reduction, blur, additive noise, vignette, then a single quantization.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::background::{self, BackgroundSource};
use crate::config::PhotoRanges;
use crate::constants::{CROP_HEIGHT, MAX_ROW_OFFSET, PITCH_DELTA_TOP_DEG};
use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, FloatPlane, Raster};
use crate::mask::AlphaMask;
use crate::rng::{derive_substream, Purpose, RngStream};

/// The two training conditions: with and without background randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Aug,
    BgAug,
}

/// The fully-sampled per-sample augmentation record. Serialized one JSON
/// object per sample so any output can be replayed bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugParams {
    pub mode: Mode,
    pub bg_entry: usize,
    pub bg_crop: (u32, u32),
    pub row_offset: u32,
    pub exposure_gain: f64,
    pub gamma: f64,
    pub dr_lo: f64,
    pub dr_hi: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub vignette_f: f64,
    pub vignette_strength: f64,
}

impl AugParams {
    /// Params that leave the pixels of a middle crop untouched.
    pub fn identity(mode: Mode) -> Self {
        AugParams {
            mode,
            bg_entry: 0,
            bg_crop: (0, 0),
            row_offset: MAX_ROW_OFFSET / 2,
            exposure_gain: 1.0,
            gamma: 1.0,
            dr_lo: 0.0,
            dr_hi: 255.0,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            noise_seed: 0,
            vignette_f: 1.0,
            vignette_strength: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_offset > MAX_ROW_OFFSET {
            return Err(Error::Argument(format!(
                "row_offset {} exceeds {MAX_ROW_OFFSET}",
                self.row_offset
            )));
        }
        if self.exposure_gain <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::Argument("gain and gamma must be positive".into()));
        }
        if self.dr_lo >= self.dr_hi {
            return Err(Error::Argument(format!(
                "dynamic range [{}, {}] is empty",
                self.dr_lo, self.dr_hi
            )));
        }
        if self.blur_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Argument("sigmas must be non-negative".into()));
        }
        if self.vignette_f <= 0.0 || !(0.0..=1.0).contains(&self.vignette_strength) {
            return Err(Error::Argument("invalid vignette parameters".into()));
        }
        Ok(())
    }
}

/// Sample the full parameter record for sample `index` of `epoch`.
///
/// Draw-count contract per substream: Background 3, Pitch 1, Photometric 8.
/// The photometric draw order is exposure, gamma, dr_lo, dr_hi, blur,
/// noise_sigma, vignette_f, vignette_strength; blur folds its apply-coin and
/// sigma into one draw (below `1 - blur_prob` means no blur, the remainder
/// of the unit interval maps linearly onto [0, blur_sigma_max]).
pub fn sample_params(
    mode: Mode,
    source: Option<&dyn BackgroundSource>,
    ranges: &PhotoRanges,
    seed: u64,
    epoch: u64,
    index: u64,
) -> Result<AugParams> {
    let (bg_entry, bg_crop) = match mode {
        Mode::BgAug => {
            let source = source.ok_or_else(|| {
                Error::Config("bgaug mode requires a background pool".into())
            })?;
            let mut rng = derive_substream(seed, epoch, index, Purpose::Background);
            background::sample_params(source, &mut rng)?
        }
        Mode::Aug => (0, (0, 0)),
    };

    let mut pitch = derive_substream(seed, epoch, index, Purpose::Pitch);
    let row_offset = pitch.draw_uniform_int(0, MAX_ROW_OFFSET as u64)? as u32;

    let mut photo = derive_substream(seed, epoch, index, Purpose::Photometric);
    let exposure_gain = photo.draw_uniform(ranges.exposure_gain[0], ranges.exposure_gain[1])?;
    let gamma = photo.draw_uniform(ranges.gamma[0], ranges.gamma[1])?;
    let dr_lo = photo.draw_uniform(ranges.dr_lo[0], ranges.dr_lo[1])?;
    let dr_hi = photo.draw_uniform(ranges.dr_hi[0], ranges.dr_hi[1])?;
    let blur_draw = photo.draw_uniform(0.0, 1.0)?;
    let blur_sigma = if ranges.blur_prob > 0.0 && blur_draw >= 1.0 - ranges.blur_prob {
        (blur_draw - (1.0 - ranges.blur_prob)) / ranges.blur_prob * ranges.blur_sigma_max
    } else {
        0.0
    };
    let noise_sigma = photo.draw_uniform(ranges.noise_sigma[0], ranges.noise_sigma[1])?;
    let vignette_f = photo.draw_uniform(ranges.vignette_f[0], ranges.vignette_f[1])?;
    let vignette_strength =
        photo.draw_uniform(ranges.vignette_strength[0], ranges.vignette_strength[1])?;
    debug_assert_eq!(photo.draw_count(), 8);

    let noise_seed = derive_substream(seed, epoch, index, Purpose::Noise).state();

    let params = AugParams {
        mode,
        bg_entry,
        bg_crop,
        row_offset,
        exposure_gain,
        gamma,
        dr_lo,
        dr_hi,
        blur_sigma,
        noise_sigma,
        noise_seed,
        vignette_f,
        vignette_strength,
    };
    params.validate()?;
    Ok(params)
}

/// Porter-Duff "over": out = alpha * frame + (1 - alpha) * background, done
/// in real arithmetic and quantized once.
pub fn replace_background(frame: &Raster, alpha: &AlphaMask, background: &Raster) -> Result<Raster> {
    if (frame.width(), frame.height()) != (alpha.width(), alpha.height())
        || (frame.width(), frame.height()) != (background.width(), background.height())
    {
        return Err(Error::Argument(format!(
            "compositing dimension mismatch: frame {}x{}, alpha {}x{}, background {}x{}",
            frame.width(),
            frame.height(),
            alpha.width(),
            alpha.height(),
            background.width(),
            background.height()
        )));
    }
    let out: Vec<f64> = frame
        .pixels()
        .iter()
        .zip(alpha.alpha())
        .zip(background.pixels())
        .map(|((&f, &a), &b)| {
            let a = a as f64;
            a * f as f64 + (1.0 - a) * b as f64
        })
        .collect();
    Ok(FloatPlane::new(frame.width(), frame.height(), out)?.quantize())
}

/// Keep rows [row_offset, row_offset + 96): the pitch-augmentation crop.
pub fn pitch_crop(frame: &Raster, row_offset: u32) -> Result<Raster> {
    if row_offset > MAX_ROW_OFFSET {
        return Err(Error::Argument(format!(
            "row_offset {row_offset} exceeds {MAX_ROW_OFFSET}"
        )));
    }
    crate::imaging::crop(frame, 0, row_offset, frame.width(), CROP_HEIGHT)
}

/// Approximate pitch change implied by a row offset, in degrees, relative
/// to the middle crop. Metadata only; never alters pixels or labels.
pub fn offset_to_pitch_delta(row_offset: u32) -> Result<f64> {
    if row_offset > MAX_ROW_OFFSET {
        return Err(Error::Argument(format!(
            "row_offset {row_offset} exceeds {MAX_ROW_OFFSET}"
        )));
    }
    let mid = MAX_ROW_OFFSET as f64 / 2.0;
    Ok((mid - row_offset as f64) * (PITCH_DELTA_TOP_DEG / mid))
}

/// out = gain * in. Clamping is deferred to the final quantization.
pub fn apply_exposure<F: Float>(img: &FloatPlane<F>, gain: f64) -> Result<FloatPlane<F>> {
    if gain <= 0.0 {
        return Err(Error::Argument(format!("non-positive gain {gain}")));
    }
    let g = F::from(gain).unwrap();
    let values = img.values().iter().map(|&v| v * g).collect();
    FloatPlane::new(img.width(), img.height(), values)
}

/// out = 255 * (clamp(in, 0, 255) / 255)^gamma.
pub fn apply_gamma<F: Float>(img: &FloatPlane<F>, gamma: f64) -> Result<FloatPlane<F>> {
    if gamma <= 0.0 {
        return Err(Error::Argument(format!("non-positive gamma {gamma}")));
    }
    let max = F::from(255.0).unwrap();
    let g = F::from(gamma).unwrap();
    let values = img
        .values()
        .iter()
        .map(|&v| {
            let c = if v < F::zero() {
                F::zero()
            } else if v > max {
                max
            } else {
                v
            };
            max * (c / max).powf(g)
        })
        .collect();
    FloatPlane::new(img.width(), img.height(), values)
}

/// Affine remap compressing [0, 255] into [lo, hi].
pub fn reduce_dynamic_range<F: Float>(img: &FloatPlane<F>, lo: f64, hi: f64) -> Result<FloatPlane<F>> {
    if !(0.0..255.0).contains(&lo) || hi > 255.0 || lo >= hi {
        return Err(Error::Argument(format!("invalid dynamic range [{lo}, {hi}]")));
    }
    let lo = F::from(lo).unwrap();
    let scale = F::from((hi - lo.to_f64().unwrap()) / 255.0).unwrap();
    let values = img.values().iter().map(|&v| lo + v * scale).collect();
    FloatPlane::new(img.width(), img.height(), values)
}

/// Additive Gaussian noise, one normal per pixel in row-major order.
pub fn add_noise<F: Float>(
    img: &FloatPlane<F>,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<FloatPlane<F>> {
    if sigma < 0.0 {
        return Err(Error::Argument(format!("negative noise sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut values = Vec::with_capacity(img.values().len());
    for &v in img.values() {
        let n = rng.draw_normal(0.0, sigma)?;
        values.push(v + F::from(n).unwrap());
    }
    FloatPlane::new(img.width(), img.height(), values)
}

/// Radial gain of the cosine-fourth falloff: (1 + (r/f)^2)^-2, where r is
/// the distance from the image center in units of the half-diagonal.
pub fn vignette_gain(r: f64, f: f64) -> f64 {
    let t = 1.0 + (r / f) * (r / f);
    1.0 / (t * t)
}

/// Blend the cosine-fourth falloff into the image:
/// out = in * ((1 - strength) + strength * gain(r)).
pub fn apply_vignette<F: Float>(
    img: &FloatPlane<F>,
    f: f64,
    strength: f64,
) -> Result<FloatPlane<F>> {
    if f <= 0.0 || !(0.0..=1.0).contains(&strength) {
        return Err(Error::Argument(format!(
            "invalid vignette f={f} strength={strength}"
        )));
    }
    let w = img.width() as f64;
    let h = img.height() as f64;
    let (cx, cy) = (w / 2.0, h / 2.0);
    let half_diag = (cx * cx + cy * cy).sqrt();
    let mut values = Vec::with_capacity(img.values().len());
    for y in 0..img.height() {
        let dy = (y as f64 + 0.5) - cy;
        for x in 0..img.width() {
            let dx = (x as f64 + 0.5) - cx;
            let r = (dx * dx + dy * dy).sqrt() / half_diag;
            let gain = (1.0 - strength) + strength * vignette_gain(r, f);
            let v = img.get(x, y) * F::from(gain).unwrap();
            values.push(v);
        }
    }
    FloatPlane::new(img.width(), img.height(), values)
}

/// The photometric stack on a real-valued plane, without quantization.
fn photometric_chain(plane: &FloatPlane<f32>, params: &AugParams) -> Result<FloatPlane<f32>> {
    let p = apply_exposure(plane, params.exposure_gain)?;
    let p = apply_gamma(&p, params.gamma)?;
    let p = reduce_dynamic_range(&p, params.dr_lo, params.dr_hi)?;
    let p = gaussian_blur(&p, params.blur_sigma)?;
    let mut noise_rng = RngStream::from_state(params.noise_seed);
    let p = add_noise(&p, params.noise_sigma, &mut noise_rng)?;
    apply_vignette(&p, params.vignette_f, params.vignette_strength)
}

/// Run the full augmentation for one sample: background replacement (BgAug
/// only), pitch crop, photometric chain, single final quantization.
pub fn augment_sample(
    frame: &Raster,
    alpha: Option<&AlphaMask>,
    source: &dyn BackgroundSource,
    params: &AugParams,
) -> Result<Raster> {
    params.validate()?;
    let composited = match params.mode {
        Mode::BgAug => {
            let alpha = alpha.ok_or_else(|| {
                Error::Config("bgaug augmentation requires an alpha mask".into())
            })?;
            let bg = source.background(params.bg_entry, params.bg_crop)?;
            replace_background(frame, alpha, &bg)?
        }
        Mode::Aug => frame.clone(),
    };
    let cropped = pitch_crop(&composited, params.row_offset)?;
    let plane = cropped.to_plane::<f32>();
    Ok(photometric_chain(&plane, params)?.quantize())
}
