//! Deterministic background-randomization augmentation for nano-drone
//! human-pose training data.
//!
//! The pipeline takes 160x160 grayscale frames with per-frame person
//! segmentation masks, replaces everything outside the subject with a random
//! indoor background (Porter-Duff over), crops a random band of 96 rows to
//! mimic camera pitch changes, and runs a photometric stack (exposure,
//! gamma, dynamic-range reduction, blur, additive noise, cosine-fourth
//! vignetting). Every random choice derives from SplitMix64 substreams keyed
//! by (seed, epoch, sample, purpose), so builds are bit-reproducible at any
//! worker count. Labeling ((x, y, phi) relative pose from mocap tracks) and
//! evaluation (per-variable R^2) tooling round out the dataset workflow.
//!
//! Numeric kernels are generic over the scalar via `num-traits`; the
//! pipeline itself runs filter chains in f32 and pose/metric math in f64.

pub mod augment;
pub mod background;
pub mod config;
pub mod constants;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod io;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod pose;
pub mod rng;

pub use error::{Error, Result};

/// Working-precision plane used by the augmentation filter chains.
pub type FloatPlane32 = imaging::FloatPlane<f32>;
/// Double-precision plane, used where 1e-6-level linearity matters.
pub type FloatPlane64 = imaging::FloatPlane<f64>;
/// World-frame pose in the precision used for labeling.
pub type AbsolutePose = pose::AbsolutePose2D<f64>;
/// Label triple in the precision used for labeling.
pub type RelPose = pose::RelativePose<f64>;
