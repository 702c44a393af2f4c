//! Binary PGM (`P5`, maxval 255) rendering of masks and rasters.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::raster::{FsmClassMap, RasterData, RasterGrid};

/// 8-bit grey image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Truncated {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }
}

/// Flood pixels are 255, everything else 0.
pub fn mask_image(mask: &BinaryMask) -> GrayImage {
    GrayImage {
        width: mask.width(),
        height: mask.height(),
        pixels: mask.pixels().iter().map(|&p| if p { 255 } else { 0 }).collect(),
    }
}

/// Categorical rasters: flood 255, permanent water 128, background and
/// nodata 0. Continuous rasters: linear stretch of valid values to 1..=255,
/// nodata 0.
pub fn raster_image(raster: &RasterGrid) -> GrayImage {
    let classes = FsmClassMap::STANDARD;
    let pixels = match raster.data() {
        RasterData::Categorical(codes) => codes
            .iter()
            .map(|&c| {
                if c == classes.flood_rp100 {
                    255
                } else if c == classes.permanent_water {
                    128
                } else {
                    0
                }
            })
            .collect(),
        RasterData::Continuous(values) => {
            let valid = |v: f32| v.is_finite() && !raster.is_nodata_value(v);
            let (lo, hi) = values
                .iter()
                .copied()
                .filter(|&v| valid(v))
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            values
                .iter()
                .map(|&v| {
                    if !valid(v) {
                        0
                    } else if hi > lo {
                        (1.0 + 254.0 * ((v - lo) / (hi - lo)) as f64).round() as u8
                    } else {
                        255
                    }
                })
                .collect()
        }
    };
    GrayImage {
        width: raster.width(),
        height: raster.height(),
        pixels,
    }
}

/// Places images left to right with a `gap`-pixel black separator; shorter
/// images are padded with black at the bottom.
pub fn side_by_side(images: &[GrayImage], gap: usize) -> Result<GrayImage> {
    if images.is_empty() {
        return Err(Error::Validation("nothing to compose".into()));
    }
    let height = images.iter().map(|i| i.height).max().unwrap();
    let width = images.iter().map(|i| i.width).sum::<usize>() + gap * (images.len() - 1);
    let mut pixels = vec![0u8; width * height];
    let mut x0 = 0;
    for img in images {
        for r in 0..img.height {
            pixels[r * width + x0..r * width + x0 + img.width]
                .copy_from_slice(&img.pixels[r * img.width..(r + 1) * img.width]);
        }
        x0 += img.width + gap;
    }
    GrayImage::new(width, height, pixels)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    // header: magic, width, height, maxval separated by whitespace, comments allowed
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("PGM header ends early".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("PGM header is not ASCII".into()))?);
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("expected P5 magic, found `{}`", fields[0])));
    }
    let num = |i: usize, name: &str| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| Error::parse(name, format!("`{}` is not a number", fields[i])))
    };
    let (width, height, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval != 255 {
        return Err(Error::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    // exactly one whitespace byte separates header and payload
    let payload = bytes.get(pos + 1..).unwrap_or(&[]);
    if payload.len() != width * height {
        return Err(Error::Truncated {
            expected: width * height,
            actual: payload.len(),
        });
    }
    GrayImage::new(width, height, payload.to_vec())
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::file(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&std::fs::read(path).map_err(|e| Error::file(path, e))?)
}
