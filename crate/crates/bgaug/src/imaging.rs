//! Raster primitives shared by the whole pipeline: 8-bit images, real-valued
//! working planes, grayscale conversion, resize, crop and separable Gaussian
//! blur.
//!
//! Filter chains run on [`FloatPlane`] and quantize to 8 bits exactly once at
//! the end of the chain (round-half-up, clamp), so repeated ops do not
//! accumulate rounding bias.

use num_traits::Float;

use crate::error::{Error, Result};

/// A width x height 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "raster dimensions {width}x{height} must be positive"
            )));
        }
        if pixels.len() != (width as usize) * (height as usize) {
            return Err(Error::Argument(format!(
                "pixel buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Raster {
            width,
            height,
            pixels: vec![value; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Lift to a real-valued working plane.
    pub fn to_plane<F: Float>(&self) -> FloatPlane<F> {
        FloatPlane {
            width: self.width,
            height: self.height,
            values: self
                .pixels
                .iter()
                .map(|&p| F::from(p).unwrap())
                .collect(),
        }
    }
}

/// A width x height plane of real intensities, row-major. Generic over the
/// scalar so filter chains can pick their working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane<F = f32> {
    width: u32,
    height: u32,
    values: Vec<F>,
}

impl<F: Float> FloatPlane<F> {
    pub fn new(width: u32, height: u32, values: Vec<F>) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::Argument(format!(
                "value buffer length {} does not match {width}x{height}",
                values.len()
            )));
        }
        Ok(FloatPlane {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: F) -> Self {
        FloatPlane {
            width,
            height,
            values: vec![value; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> F {
        self.values[(y as usize) * (self.width as usize) + x as usize]
    }

    /// Quantize to 8 bits: round half up, clamp to [0, 255]. The single
    /// quantization point at the end of a filter chain.
    pub fn quantize(&self) -> Raster {
        let lo = F::zero();
        let hi = F::from(255.0).unwrap();
        let half = F::from(0.5).unwrap();
        let pixels = self
            .values
            .iter()
            .map(|&v| {
                let v = (v + half).floor();
                let v = if v < lo { lo } else { v };
                let v = if v > hi { hi } else { v };
                v.to_u8().unwrap()
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// ITU-R BT.601 luma: round(0.299 R + 0.587 G + 0.114 B).
pub fn to_grayscale(width: u32, height: u32, rgb: &[u8]) -> Result<Raster> {
    let n = (width as usize) * (height as usize);
    if rgb.len() != n * 3 {
        return Err(Error::Argument(format!(
            "RGB buffer length {} does not match {width}x{height}x3",
            rgb.len()
        )));
    }
    let pixels = rgb
        .chunks_exact(3)
        .map(|px| {
            let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            (luma + 0.5).floor().clamp(0.0, 255.0) as u8
        })
        .collect();
    Raster::new(width, height, pixels)
}

/// Bilinear resize with half-pixel-centered sample coordinates. Resizing to
/// the source dimensions reproduces the input bit-exactly.
pub fn resize_bilinear(img: &Raster, new_w: u32, new_h: u32) -> Result<Raster> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Argument(format!(
            "resize target {new_w}x{new_h} must be positive"
        )));
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / new_h as f64;
    let mut pixels = Vec::with_capacity((new_w as usize) * (new_h as usize));
    for oy in 0..new_h as usize {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for ox in 0..new_w as usize {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            let p00 = img.pixels[y0 * w + x0] as f64;
            let p10 = img.pixels[y0 * w + x1] as f64;
            let p01 = img.pixels[y1 * w + x0] as f64;
            let p11 = img.pixels[y1 * w + x1] as f64;
            let top = p00 + (p10 - p00) * wx;
            let bot = p01 + (p11 - p01) * wx;
            let v = top + (bot - top) * wy;
            pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    Raster::new(new_w, new_h, pixels)
}

/// Copy the rectangle (x0, y0, w, h) out of `img`, bit-exact.
pub fn crop(img: &Raster, x0: u32, y0: u32, w: u32, h: u32) -> Result<Raster> {
    if x0.checked_add(w).is_none_or(|r| r > img.width)
        || y0.checked_add(h).is_none_or(|b| b > img.height)
    {
        return Err(Error::Argument(format!(
            "crop rectangle ({x0}, {y0}, {w}, {h}) exceeds {}x{} image",
            img.width, img.height
        )));
    }
    let src_w = img.width as usize;
    let mut pixels = Vec::with_capacity((w as usize) * (h as usize));
    for row in y0..y0 + h {
        let start = (row as usize) * src_w + x0 as usize;
        pixels.extend_from_slice(&img.pixels[start..start + w as usize]);
    }
    Raster::new(w, h, pixels)
}

/// Normalized 1-D Gaussian kernel of radius ceil(3 sigma).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

/// Separable Gaussian blur with edge-clamp (replicate) borders.
/// sigma == 0 returns the input unchanged.
pub fn gaussian_blur<F: Float>(img: &FloatPlane<F>, sigma: f64) -> Result<FloatPlane<F>> {
    if sigma < 0.0 {
        return Err(Error::Argument(format!("negative blur sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel: Vec<F> = gaussian_kernel(sigma)
        .into_iter()
        .map(|w| F::from(w).unwrap())
        .collect();
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let stride = img.width as usize;

    // Horizontal pass.
    let mut tmp = vec![F::zero(); img.values.len()];
    for y in 0..h {
        let row = &img.values[(y as usize) * stride..(y as usize) * stride + stride];
        for x in 0..w {
            let mut acc = F::zero();
            for (i, &kw) in kernel.iter().enumerate() {
                let sx = (x + i as i64 - radius).clamp(0, w - 1) as usize;
                acc = acc + kw * row[sx];
            }
            tmp[(y as usize) * stride + x as usize] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![F::zero(); img.values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = F::zero();
            for (i, &kw) in kernel.iter().enumerate() {
                let sy = (y + i as i64 - radius).clamp(0, h - 1) as usize;
                acc = acc + kw * tmp[sy * stride + x as usize];
            }
            out[(y as usize) * stride + x as usize] = acc;
        }
    }
    FloatPlane::new(img.width, img.height, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_endpoints() {
        let white = to_grayscale(1, 1, &[255, 255, 255]).unwrap();
        assert_eq!(white.pixels(), &[255]);
        let black = to_grayscale(1, 1, &[0, 0, 0]).unwrap();
        assert_eq!(black.pixels(), &[0]);
        // round(29.9 + 88.05 + 5.7) = 124
        let mixed = to_grayscale(1, 1, &[100, 150, 50]).unwrap();
        assert_eq!(mixed.pixels(), &[124]);
    }

    #[test]
    fn resize_identity_is_bit_exact() {
        let img = Raster::new(4, 3, (0..12).map(|i| (i * 20) as u8).collect()).unwrap();
        assert_eq!(resize_bilinear(&img, 4, 3).unwrap(), img);
    }

    #[test]
    fn resize_constant_invariance() {
        let img = Raster::filled(5, 5, 77);
        let out = resize_bilinear(&img, 13, 3).unwrap();
        assert!(out.pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn resize_upscale_monotone() {
        // Scalar reference: half-pixel centers, clamped, on a 2x1 [0, 255]
        // source give 0, 0+255*wx per output pixel; values must rise.
        let img = Raster::new(2, 1, vec![0, 255]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        let px = out.pixels();
        assert_eq!(px[0], 0);
        assert_eq!(px[3], 255);
        for pair in px.windows(2) {
            assert!(pair[0] <= pair[1], "{px:?} not monotone");
        }
    }

    #[test]
    fn crop_full_and_oob() {
        let img = Raster::new(8, 8, (0..64).collect()).unwrap();
        assert_eq!(crop(&img, 0, 0, 8, 8).unwrap(), img);
        assert!(crop(&img, 0, 5, 8, 4).is_err());
    }

    #[test]
    fn crop_composes() {
        let img = Raster::new(10, 10, (0..100).collect()).unwrap();
        let a = crop(&img, 2, 3, 6, 5).unwrap();
        let b = crop(&a, 1, 1, 4, 3).unwrap();
        let direct = crop(&img, 3, 4, 4, 3).unwrap();
        assert_eq!(b, direct);
    }

    #[test]
    fn kernel_normalized() {
        for sigma in [0.3, 1.0, 2.5] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_zero_sigma_identity() {
        let plane = FloatPlane::<f64>::new(3, 3, (0..9).map(|i| i as f64).collect()).unwrap();
        assert_eq!(gaussian_blur(&plane, 0.0).unwrap(), plane);
        assert!(gaussian_blur(&plane, -1.0).is_err());
    }

    #[test]
    fn blur_constant_invariance() {
        let plane = FloatPlane::<f64>::filled(7, 5, 42.0);
        let out = gaussian_blur(&plane, 1.0).unwrap();
        for &v in out.values() {
            assert!((v - 42.0).abs() < 1e-6);
        }
        let mean = out.values().iter().sum::<f64>() / out.values().len() as f64;
        assert!((mean - 42.0).abs() < 1e-6);
    }

    #[test]
    fn blur_impulse_center_weight() {
        // Independent oracle: center response of a separable blur on a unit
        // impulse is the squared center weight of the 1-D kernel.
        let mut values = vec![0.0f64; 81];
        values[4 * 9 + 4] = 1.0;
        let plane = FloatPlane::new(9, 9, values).unwrap();
        let out = gaussian_blur(&plane, 1.0).unwrap();
        let k = gaussian_kernel(1.0);
        let center = k[k.len() / 2];
        assert!((out.get(4, 4) - center * center).abs() < 1e-12);
    }

    #[test]
    fn quantize_rounds_half_up_and_clamps() {
        let plane = FloatPlane::<f32>::new(1, 4, vec![-3.0, 0.5, 254.49, 300.0]).unwrap();
        assert_eq!(plane.quantize().pixels(), &[0, 1, 254, 255]);
    }

    proptest! {
        #[test]
        fn prop_crop_nested(x0 in 0u32..4, y0 in 0u32..4, w in 1u32..5, h in 1u32..5) {
            let img = Raster::new(12, 12, (0..144).map(|i| (i % 251) as u8).collect()).unwrap();
            let outer = crop(&img, 2, 2, 8, 8).unwrap();
            let inner = crop(&outer, x0, y0, w.min(8 - x0), h.min(8 - y0)).unwrap();
            let direct = crop(&img, 2 + x0, 2 + y0, w.min(8 - x0), h.min(8 - y0)).unwrap();
            prop_assert_eq!(inner, direct);
        }

        #[test]
        fn prop_resize_identity(w in 1u32..9, h in 1u32..9, seed in 0u64..1000) {
            let mut s = crate::rng::derive_substream(seed, 0, 0, crate::rng::Purpose::Split);
            let px: Vec<u8> = (0..w * h).map(|_| s.next_u64() as u8).collect();
            let img = Raster::new(w, h, px).unwrap();
            prop_assert_eq!(resize_bilinear(&img, w, h).unwrap(), img);
        }
    }
}
