//! Reproducible randomness: SplitMix64 substreams keyed by
//! (seed, epoch, sample index, purpose).
//!
//! Every random decision in the pipeline draws from its own substream, so
//! sample generation is independent of iteration order and thread
//! assignment. Draw counts per purpose are part of the format contract:
//! Background 3, Pitch 1, Photometric 8, Noise 2 per pixel.

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What a substream is used for. The discriminant participates in stream
/// derivation, so streams for distinct purposes never share a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Background,
    Pitch,
    Photometric,
    Noise,
    Split,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Background => 1,
            Purpose::Pitch => 2,
            Purpose::Photometric => 3,
            Purpose::Noise => 4,
            Purpose::Split => 5,
        }
    }
}

/// A single-owner deterministic stream of random values.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    counter: u64,
}

/// Derive the independent substream for (seed, epoch, index, purpose).
pub fn derive_substream(seed: u64, epoch: u64, index: u64, purpose: Purpose) -> RngStream {
    let state = mix(seed ^ mix(epoch) ^ mix(index) ^ mix(purpose.code()));
    RngStream::from_state(state)
}

impl RngStream {
    /// Rebuild a stream from a recorded initial state (replay path).
    pub fn from_state(state: u64) -> Self {
        RngStream { state, counter: 0 }
    }

    /// The initial/current state value; recording it enables exact replay.
    pub fn state(&self) -> u64 {
        self.state
    }

    /// Number of raw 64-bit draws consumed so far.
    pub fn draw_count(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        self.counter += 1;
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53-bit mantissa resolution. One draw.
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform real in [lo, hi). Always consumes exactly one draw.
    pub fn draw_uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("uniform range [{lo}, {hi}]")));
        }
        let u = self.next_f64();
        Ok(lo + u * (hi - lo))
    }

    /// Uniform integer in [lo, hi] inclusive, by rejection (no modulo bias).
    pub fn draw_uniform_int(&mut self, lo: u64, hi: u64) -> Result<u64> {
        if lo > hi {
            return Err(Error::Argument(format!("integer range [{lo}, {hi}]")));
        }
        let span = hi - lo;
        if span == u64::MAX {
            return Ok(self.next_u64());
        }
        let range = span + 1;
        let zone = (u64::MAX / range) * range;
        loop {
            let v = self.next_u64();
            if v < zone {
                return Ok(lo + v % range);
            }
        }
    }

    /// Normal(mu, sigma^2) via Box-Muller; consumes exactly two draws.
    pub fn draw_normal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if sigma < 0.0 {
            return Err(Error::Argument(format!("negative sigma {sigma}")));
        }
        // u1 in (0, 1] so ln is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok(mu + sigma * z)
    }
}
