//! `ZFR1` flat binary raster container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "ZFR1" | u32 width | u32 height | u8 kind (0 continuous, 1 categorical)
//! | f64 origin_x | f64 origin_y | f64 pixel_w | f64 pixel_h | f32 nodata
//! | u16 crs length | crs bytes (UTF-8) | payload (f32 or u8 per pixel, row-major)
//! ```

use std::fs;
use std::path::Path;

use super::{GeoTransform, RasterData, RasterGrid};
use crate::error::{Error, Result};

pub const ZFR_MAGIC: &[u8; 4] = b"ZFR1";

pub fn encode_zfr(raster: &RasterGrid) -> Result<Vec<u8>> {
    let crs = raster.crs_id().as_bytes();
    let crs_len = u16::try_from(crs.len())
        .map_err(|_| Error::Validation("crs_id longer than 65535 bytes".into()))?;
    let width = u32::try_from(raster.width())
        .map_err(|_| Error::Validation("raster width exceeds u32".into()))?;
    let height = u32::try_from(raster.height())
        .map_err(|_| Error::Validation("raster height exceeds u32".into()))?;

    let payload = match raster.data() {
        RasterData::Continuous(v) => v.len() * 4,
        RasterData::Categorical(v) => v.len(),
    };
    let mut out = Vec::with_capacity(47 + crs.len() + payload);
    out.extend_from_slice(ZFR_MAGIC);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.push(match raster.data() {
        RasterData::Continuous(_) => 0,
        RasterData::Categorical(_) => 1,
    });
    let t = raster.transform();
    for v in [t.origin_x, t.origin_y, t.pixel_w, t.pixel_h] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&raster.nodata().to_le_bytes());
    out.extend_from_slice(&crs_len.to_le_bytes());
    out.extend_from_slice(crs);
    match raster.data() {
        RasterData::Continuous(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        RasterData::Categorical(v) => out.extend_from_slice(v),
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format(format!(
                "header ends early at byte {} of {}",
                self.bytes.len(),
                end
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

pub fn decode_zfr(bytes: &[u8]) -> Result<RasterGrid> {
    if bytes.len() < 4 || &bytes[..4] != ZFR_MAGIC {
        return Err(Error::Format("missing ZFR1 magic bytes".into()));
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let width = u32::from_le_bytes(cur.array()?) as usize;
    let height = u32::from_le_bytes(cur.array()?) as usize;
    let kind = cur.take(1)?[0];
    let origin_x = f64::from_le_bytes(cur.array()?);
    let origin_y = f64::from_le_bytes(cur.array()?);
    let pixel_w = f64::from_le_bytes(cur.array()?);
    let pixel_h = f64::from_le_bytes(cur.array()?);
    let nodata = f32::from_le_bytes(cur.array()?);
    let crs_len = u16::from_le_bytes(cur.array()?) as usize;
    let crs = std::str::from_utf8(cur.take(crs_len)?)
        .map_err(|_| Error::Format("crs_id is not valid UTF-8".into()))?
        .to_owned();

    let n = width * height;
    let payload = &bytes[cur.pos..];
    let data = match kind {
        0 => {
            if payload.len() != n * 4 {
                return Err(Error::Truncated {
                    expected: n,
                    actual: payload.len() / 4,
                });
            }
            RasterData::Continuous(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
        1 => {
            if payload.len() != n {
                return Err(Error::Truncated {
                    expected: n,
                    actual: payload.len(),
                });
            }
            RasterData::Categorical(payload.to_vec())
        }
        other => return Err(Error::Format(format!("unknown raster kind byte {other}"))),
    };
    let transform = GeoTransform::new(origin_x, origin_y, pixel_w, pixel_h)?;
    RasterGrid::new(width, height, transform, crs, nodata, data)
}

pub fn write_binary_raster(raster: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_zfr(raster)?).map_err(|e| Error::file(path, e))
}

pub fn read_binary_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_zfr(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> RasterGrid {
        let t = GeoTransform::new(500000.0, 4100000.0, 10.0, 10.0).unwrap();
        RasterGrid::categorical(3, 2, t, "EPSG:32633", 255, vec![0, 1, 2, 255, 1, 0]).unwrap()
    }

    #[test]
    fn empty_file_is_format_error() {
        assert!(matches!(decode_zfr(&[]).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_zfr(&fixture()).unwrap();
        bytes[3] = b'2';
        assert!(matches!(decode_zfr(&bytes).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn short_payload_is_truncation_error() {
        let mut bytes = encode_zfr(&fixture()).unwrap();
        bytes.pop();
        assert!(matches!(
            decode_zfr(&bytes).unwrap_err(),
            Error::Truncated { expected: 6, actual: 5 }
        ));
    }

    #[test]
    fn header_layout_matches_documented_offsets() {
        let bytes = encode_zfr(&fixture()).unwrap();
        assert_eq!(&bytes[..4], b"ZFR1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes[12], 1);
        assert_eq!(f64::from_le_bytes(bytes[13..21].try_into().unwrap()), 500000.0);
        assert_eq!(f32::from_le_bytes(bytes[45..49].try_into().unwrap()), 255.0);
        assert_eq!(u16::from_le_bytes(bytes[49..51].try_into().unwrap()), 10);
        assert_eq!(&bytes[51..61], b"EPSG:32633");
        assert_eq!(&bytes[61..], &[0, 1, 2, 255, 1, 0]);
    }

    #[test]
    fn categorical_roundtrip() {
        let r = fixture();
        assert_eq!(decode_zfr(&encode_zfr(&r).unwrap()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn continuous_roundtrip_is_bit_exact(
            w in 1usize..12,
            h in 1usize..12,
            seed in any::<u64>(),
            ox in -1e6f64..1e6,
            px in 0.01f64..100.0,
        ) {
            let mut state = seed;
            let values: Vec<f32> = (0..w * h)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f32::from_bits((state >> 32) as u32)
                })
                .collect();
            let t = GeoTransform::new(ox, -ox, px, px * 2.0).unwrap();
            let r = RasterGrid::continuous(w, h, t, "crs", f32::NAN, values).unwrap();
            let back = decode_zfr(&encode_zfr(&r).unwrap()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
