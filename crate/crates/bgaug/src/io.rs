//! Image file I/O: 8-bit grayscale PNG and binary PGM (P5, maxval 255) in
//! and out; color inputs accepted as 8-bit RGB and converted to luma.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, Raster};

/// Load any supported image as 8-bit grayscale. Color images go through the
/// BT.601 luma conversion; already-gray images pass through untouched.
pub fn load_grayscale(path: &Path) -> Result<Raster> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        return load_pgm(path);
    }
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    match img {
        DynamicImage::ImageLuma8(g) => {
            Raster::new(g.width(), g.height(), g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            to_grayscale(rgb.width(), rgb.height(), rgb.as_raw())
        }
    }
}

/// Read only the dimensions of an image file, without decoding pixel data.
pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        let raster = load_pgm(path)?;
        return Ok((raster.width(), raster.height()));
    }
    image::image_dimensions(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Write a raster as 8-bit grayscale PNG or binary PGM, by extension.
pub fn save_grayscale(path: &Path, img: &Raster) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        return save_pgm(path, img);
    }
    let buf = image::GrayImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .expect("raster invariant guarantees buffer size");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other}", path.display())),
        })
}

fn load_pgm(path: &Path) -> Result<Raster> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&data).map_err(|msg| Error::Data(format!("{}: {msg}", path.display())))
}

fn parse_pgm(data: &[u8]) -> std::result::Result<Raster, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<&[u8], String> {
        while pos < data.len() {
            match data[pos] {
                b'#' => {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(&data[start..pos])
    };
    if token()? != b"P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let parse_num = |t: &[u8]| -> std::result::Result<u32, String> {
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "bad header number".into())
    };
    let width = parse_num(token()?)?;
    let height = parse_num(token()?)?;
    let maxval = parse_num(token()?)?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // Single whitespace byte separates header from pixel data.
    let start = pos + 1;
    let n = (width as usize) * (height as usize);
    if data.len() < start + n {
        return Err("truncated pixel data".into());
    }
    Raster::new(width, height, data[start..start + n].to_vec()).map_err(|e| e.to_string())
}

fn save_pgm(path: &Path, img: &Raster) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(f, "P5\n{} {}\n255\n", img.width(), img.height())
        .and_then(|_| f.write_all(img.pixels()))
        .map_err(|e| Error::io(path, e))
}
