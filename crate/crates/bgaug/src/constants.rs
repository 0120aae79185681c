//! Pipeline constants. These are frozen: every stage of the pipeline and
//! the on-disk formats assume them, so a change here is a breaking change.

/// Training frame width in pixels.
pub const FRAME_WIDTH: u32 = 160;
/// Training frame height in pixels.
pub const FRAME_HEIGHT: u32 = 160;
/// Height of the pitch crop (contiguous rows kept from a frame).
pub const CROP_HEIGHT: u32 = 96;
/// Largest valid row offset for the pitch crop (FRAME_HEIGHT - CROP_HEIGHT).
pub const MAX_ROW_OFFSET: u32 = FRAME_HEIGHT - CROP_HEIGHT;
/// Row offset of the centered evaluation crop (middle CROP_HEIGHT rows).
pub const EVAL_ROW_OFFSET: u32 = MAX_ROW_OFFSET / 2;
/// Pitch change, in degrees, between the top crop and the middle crop.
pub const PITCH_DELTA_TOP_DEG: f64 = 14.0;
/// Default sigma, in pixels, for softening segmentation masks.
pub const MASK_SOFTEN_SIGMA: f64 = 1.0;
/// Training steps per epoch.
pub const STEPS_PER_EPOCH: u32 = 320;
/// Instances per batch.
pub const BATCH_SIZE: u32 = 64;
/// Samples generated per epoch.
pub const SAMPLES_PER_EPOCH: u64 = (STEPS_PER_EPOCH as u64) * (BATCH_SIZE as u64);
/// Fraction of the training set held out for validation.
pub const VAL_FRACTION: f64 = 0.2;
/// Background pool entries smaller than target/SIZE_REJECT_DIVISOR in either
/// dimension are rejected as degenerate thumbnails.
pub const SIZE_REJECT_DIVISOR: u32 = 4;
