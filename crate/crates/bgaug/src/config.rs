//! Photometric sampling ranges, overridable from a TOML or JSON file.
//!
//! The defaults are conservative engineering choices; every field can be
//! overridden per dataset build via `--config`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling ranges for the per-sample photometric parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhotoRanges {
    /// Multiplicative exposure gain, uniform over [lo, hi].
    pub exposure_gain: [f64; 2],
    /// Gamma exponent, uniform over [lo, hi].
    pub gamma: [f64; 2],
    /// Lower bound of the reduced dynamic range, uniform over [lo, hi].
    pub dr_lo: [f64; 2],
    /// Upper bound of the reduced dynamic range, uniform over [lo, hi].
    pub dr_hi: [f64; 2],
    /// Probability that blur is applied at all.
    pub blur_prob: f64,
    /// Blur sigma, uniform over [0, max] when applied.
    pub blur_sigma_max: f64,
    /// Additive-noise sigma in intensity units, uniform over [lo, hi].
    pub noise_sigma: [f64; 2],
    /// Vignette focal ratio (of the half-diagonal), uniform over [lo, hi].
    pub vignette_f: [f64; 2],
    /// Vignette blend strength, uniform over [lo, hi].
    pub vignette_strength: [f64; 2],
}

impl Default for PhotoRanges {
    fn default() -> Self {
        PhotoRanges {
            exposure_gain: [0.7, 1.3],
            gamma: [0.6, 1.4],
            dr_lo: [0.0, 50.0],
            dr_hi: [205.0, 255.0],
            blur_prob: 0.5,
            blur_sigma_max: 1.5,
            noise_sigma: [0.0, 8.0],
            vignette_f: [0.7, 1.6],
            vignette_strength: [0.0, 1.0],
        }
    }
}

impl PhotoRanges {
    /// Load overrides from a TOML or JSON file (picked by extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ranges: PhotoRanges = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        ranges.validate()?;
        Ok(ranges)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, r: [f64; 2]| {
            if r[0] <= r[1] {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} range [{}, {}] inverted", r[0], r[1])))
            }
        };
        ordered("exposure_gain", self.exposure_gain)?;
        ordered("gamma", self.gamma)?;
        ordered("dr_lo", self.dr_lo)?;
        ordered("dr_hi", self.dr_hi)?;
        ordered("noise_sigma", self.noise_sigma)?;
        ordered("vignette_f", self.vignette_f)?;
        ordered("vignette_strength", self.vignette_strength)?;
        if self.exposure_gain[0] <= 0.0 {
            return Err(Error::Config("exposure_gain must be positive".into()));
        }
        if self.gamma[0] <= 0.0 {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.dr_lo[1] >= self.dr_hi[0] {
            return Err(Error::Config(
                "dr_lo range must lie strictly below dr_hi range".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.blur_prob) {
            return Err(Error::Config("blur_prob must lie in [0, 1]".into()));
        }
        if self.blur_sigma_max < 0.0 || self.noise_sigma[0] < 0.0 {
            return Err(Error::Config("sigmas must be non-negative".into()));
        }
        if self.vignette_f[0] <= 0.0 {
            return Err(Error::Config("vignette_f must be positive".into()));
        }
        if self.vignette_strength[0] < 0.0 || self.vignette_strength[1] > 1.0 {
            return Err(Error::Config("vignette_strength must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Ranges that make every photometric step the identity; used by the
    /// deterministic preview/eval paths and in tests.
    pub fn identity() -> Self {
        PhotoRanges {
            exposure_gain: [1.0, 1.0],
            gamma: [1.0, 1.0],
            dr_lo: [0.0, 0.0],
            dr_hi: [255.0, 255.0],
            blur_prob: 0.0,
            blur_sigma_max: 0.0,
            noise_sigma: [0.0, 0.0],
            vignette_f: [1.0, 1.0],
            vignette_strength: [0.0, 0.0],
        }
    }
}
