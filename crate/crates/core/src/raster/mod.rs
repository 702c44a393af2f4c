//! Single-band georeferenced rasters and the pixel/world coordinate algebra.
//!
//! Rows run top to bottom: pixel `(col, row)` has its upper-left corner at
//! `(origin_x + col * pixel_w, origin_y - row * pixel_h)`. Point-in-cell
//! tests use pixel centers throughout.

mod ascii;
mod window;
mod zfr;

pub use ascii::{read_ascii_grid, write_ascii_grid};
pub use window::{pixel_range, read_window, resample_nearest, PixelRange};
pub use zfr::{decode_zfr, encode_zfr, read_binary_raster, write_binary_raster};

use crate::error::{Error, Result};

/// Rotation-free affine transform from pixel indices to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_w: f64,
    pub pixel_h: f64,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_w: f64, pixel_h: f64) -> Result<Self> {
        if !(pixel_w > 0.0 && pixel_w.is_finite()) || !(pixel_h > 0.0 && pixel_h.is_finite()) {
            return Err(Error::Validation(format!(
                "pixel size must be positive and finite, got {pixel_w} x {pixel_h}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Validation("transform origin must be finite".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            pixel_w,
            pixel_h,
        })
    }

    /// Builds a transform from GDAL-ordered coefficients
    /// `[origin_x, pixel_w, row_rot, origin_y, col_rot, -pixel_h]`.
    /// Rotated or south-up transforms are rejected.
    pub fn from_affine(coeffs: [f64; 6]) -> Result<Self> {
        if coeffs[2] != 0.0 || coeffs[4] != 0.0 {
            return Err(Error::Validation(format!(
                "rotated geotransforms are not supported (rotation terms {}, {})",
                coeffs[2], coeffs[4]
            )));
        }
        if coeffs[5] >= 0.0 {
            return Err(Error::Validation(
                "pixel height must be negative (north-up) in affine form".into(),
            ));
        }
        Self::new(coeffs[0], coeffs[3], coeffs[1], -coeffs[5])
    }

    /// Upper-left corner of pixel `(col, row)`.
    pub fn pixel_to_world(&self, col: i64, row: i64) -> (f64, f64) {
        (
            self.origin_x + col as f64 * self.pixel_w,
            self.origin_y - row as f64 * self.pixel_h,
        )
    }

    pub fn pixel_center(&self, col: i64, row: i64) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_w,
            self.origin_y - (row as f64 + 0.5) * self.pixel_h,
        )
    }

    /// Floor mapping from world coordinates to the pixel containing them.
    /// Out-of-bounds indices are returned as-is.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (i64, i64) {
        let col = ((x - self.origin_x) / self.pixel_w).floor();
        let row = ((self.origin_y - y) / self.pixel_h).floor();
        (col as i64, row as i64)
    }

    pub fn extent(&self, width: usize, height: usize) -> BoundingBox {
        BoundingBox {
            min_x: self.origin_x,
            min_y: self.origin_y - height as f64 * self.pixel_h,
            max_x: self.origin_x + width as f64 * self.pixel_w,
            max_y: self.origin_y,
        }
    }

    /// Transform of a sub-grid whose upper-left pixel is `(col, row)` here.
    pub fn offset(&self, col: i64, row: i64) -> Self {
        let (x, y) = self.pixel_to_world(col, row);
        Self { origin_x: x, origin_y: y, ..*self }
    }
}

/// Free function form of [`GeoTransform::world_to_pixel`].
pub fn world_to_pixel(transform: &GeoTransform, x: f64, y: f64) -> (i64, i64) {
    transform.world_to_pixel(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        if !(min_x < max_x && min_y < max_y) {
            return Err(Error::Validation(format!(
                "degenerate bounding box ({min_x}, {min_y}, {max_x}, {max_y})"
            )));
        }
        Ok(Self { min_x, min_y, max_x, max_y })
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }
}

/// Class codes of a categorical flood-susceptibility raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsmClassMap {
    pub background: u8,
    pub flood_rp100: u8,
    pub permanent_water: u8,
}

impl FsmClassMap {
    pub const STANDARD: FsmClassMap = FsmClassMap {
        background: 0,
        flood_rp100: 1,
        permanent_water: 2,
    };

    pub fn contains(&self, code: u8) -> bool {
        code == self.background || code == self.flood_rp100 || code == self.permanent_water
    }
}

impl Default for FsmClassMap {
    fn default() -> Self {
        Self::STANDARD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    Continuous(Vec<f32>),
    Categorical(Vec<u8>),
}

impl RasterData {
    pub fn len(&self) -> usize {
        match self {
            RasterData::Continuous(v) => v.len(),
            RasterData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> RasterKind {
        match self {
            RasterData::Continuous(_) => RasterKind::Continuous,
            RasterData::Categorical(_) => RasterKind::Categorical,
        }
    }
}

/// Immutable single-band raster, row-major from the top row down.
#[derive(Debug, Clone)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    transform: GeoTransform,
    crs_id: String,
    nodata: f32,
    data: RasterData,
}

/// Field-wise equality that compares floating-point payloads and nodata by
/// bit pattern, so NaN nodata rasters compare equal to themselves.
impl PartialEq for RasterGrid {
    fn eq(&self, other: &Self) -> bool {
        let data_eq = match (&self.data, &other.data) {
            (RasterData::Continuous(a), RasterData::Continuous(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (RasterData::Categorical(a), RasterData::Categorical(b)) => a == b,
            _ => false,
        };
        self.width == other.width
            && self.height == other.height
            && self.transform == other.transform
            && self.crs_id == other.crs_id
            && self.nodata.to_bits() == other.nodata.to_bits()
            && data_eq
    }
}

impl RasterGrid {
    pub fn new(
        width: usize,
        height: usize,
        transform: GeoTransform,
        crs_id: impl Into<String>,
        nodata: f32,
        data: RasterData,
    ) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::Validation("raster dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Truncated {
                expected,
                actual: data.len(),
            });
        }
        if let RasterData::Categorical(codes) = &data {
            let classes = FsmClassMap::STANDARD;
            let nodata_code = categorical_nodata(nodata)?;
            if classes.contains(nodata_code) {
                return Err(Error::Validation(format!(
                    "nodata code {nodata_code} collides with a class code"
                )));
            }
            if let Some(bad) = codes
                .iter()
                .find(|&&c| c != nodata_code && !classes.contains(c))
            {
                return Err(Error::Validation(format!("undeclared class code {bad}")));
            }
        }
        Ok(Self {
            width,
            height,
            transform,
            crs_id: crs_id.into(),
            nodata,
            data,
        })
    }

    pub fn continuous(
        width: usize,
        height: usize,
        transform: GeoTransform,
        crs_id: impl Into<String>,
        nodata: f32,
        values: Vec<f32>,
    ) -> Result<Self> {
        Self::new(width, height, transform, crs_id, nodata, RasterData::Continuous(values))
    }

    pub fn categorical(
        width: usize,
        height: usize,
        transform: GeoTransform,
        crs_id: impl Into<String>,
        nodata: u8,
        codes: Vec<u8>,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            transform,
            crs_id,
            nodata as f32,
            RasterData::Categorical(codes),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn crs_id(&self) -> &str {
        &self.crs_id
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn kind(&self) -> RasterKind {
        self.data.kind()
    }

    pub fn data(&self) -> &RasterData {
        &self.data
    }

    pub fn extent(&self) -> BoundingBox {
        self.transform.extent(self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel value widened to `f32`; categorical codes map to their numeric value.
    pub fn get(&self, col: usize, row: usize) -> f32 {
        let i = row * self.width + col;
        match &self.data {
            RasterData::Continuous(v) => v[i],
            RasterData::Categorical(v) => v[i] as f32,
        }
    }

    pub fn is_nodata_value(&self, value: f32) -> bool {
        value == self.nodata || (value.is_nan() && self.nodata.is_nan())
    }

    pub fn is_nodata(&self, col: usize, row: usize) -> bool {
        self.is_nodata_value(self.get(col, row))
    }

    pub fn as_continuous(&self) -> Option<&[f32]> {
        match &self.data {
            RasterData::Continuous(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u8]> {
        match &self.data {
            RasterData::Categorical(v) => Some(v),
            _ => None,
        }
    }

    /// Reinterprets a continuous raster holding integral class codes as categorical.
    pub fn into_categorical(self) -> Result<Self> {
        let values = match self.data {
            RasterData::Categorical(_) => return Ok(self),
            RasterData::Continuous(v) => v,
        };
        let nodata_code = categorical_nodata(self.nodata)?;
        let codes = values
            .iter()
            .map(|&v| {
                if v == self.nodata {
                    Ok(nodata_code)
                } else if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                    Ok(v as u8)
                } else {
                    Err(Error::Validation(format!("value {v} is not a class code")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(
            self.width,
            self.height,
            self.transform,
            self.crs_id,
            self.nodata,
            RasterData::Categorical(codes),
        )
    }

    pub(crate) fn with_data(&self, width: usize, height: usize, transform: GeoTransform, data: RasterData) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            transform,
            crs_id: self.crs_id.clone(),
            nodata: self.nodata,
            data,
        }
    }
}

pub(crate) fn categorical_nodata(nodata: f32) -> Result<u8> {
    if nodata.fract() == 0.0 && (0.0..=255.0).contains(&nodata) {
        Ok(nodata as u8)
    } else {
        Err(Error::Validation(format!(
            "categorical nodata must be an integer in 0..=255, got {nodata}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> GeoTransform {
        GeoTransform::new(0.0, 100.0, 10.0, 10.0).unwrap()
    }

    #[test]
    fn world_to_pixel_first_pixel() {
        assert_eq!(world_to_pixel(&gt(), 5.0, 95.0), (0, 0));
    }

    #[test]
    fn world_to_pixel_floor_arithmetic() {
        assert_eq!(world_to_pixel(&gt(), 25.0, 95.0), (2, 0));
    }

    #[test]
    fn world_to_pixel_out_of_bounds_is_returned() {
        assert_eq!(world_to_pixel(&gt(), -1.0, 95.0), (-1, 0));
    }

    #[test]
    fn centers_map_back_to_their_pixel() {
        let t = GeoTransform::new(-1234.5, 987.25, 0.3, 7.0).unwrap();
        for row in 0..50 {
            for col in 0..50 {
                let (x, y) = t.pixel_center(col, row);
                assert_eq!(t.world_to_pixel(x, y), (col, row));
            }
        }
    }

    #[test]
    fn rejects_bad_transforms() {
        assert!(GeoTransform::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(GeoTransform::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(GeoTransform::from_affine([0.0, 1.0, 0.1, 0.0, 0.0, -1.0]).is_err());
        let t = GeoTransform::from_affine([5.0, 2.0, 0.0, 9.0, 0.0, -3.0]).unwrap();
        assert_eq!(t, GeoTransform::new(5.0, 9.0, 2.0, 3.0).unwrap());
    }

    #[test]
    fn categorical_rejects_undeclared_codes() {
        let err = RasterGrid::categorical(2, 1, gt(), "", 255, vec![1, 7]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = RasterGrid::categorical(2, 1, gt(), "", 1, vec![1, 0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(RasterGrid::categorical(2, 1, gt(), "", 255, vec![255, 2]).is_ok());
    }

    #[test]
    fn data_length_must_match() {
        let err = RasterGrid::continuous(3, 3, gt(), "", -9999.0, vec![0.0; 8]).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 9, actual: 8 }));
    }

    #[test]
    fn into_categorical_checks_integrality() {
        let r = RasterGrid::continuous(3, 1, gt(), "", -9999.0, vec![0.0, 1.0, 2.0]);
        // -9999 cannot be a u8 code
        assert!(r.unwrap().into_categorical().is_err());
        let r = RasterGrid::continuous(3, 1, gt(), "", 255.0, vec![0.0, 1.5, 255.0]).unwrap();
        assert!(r.into_categorical().is_err());
        let r = RasterGrid::continuous(3, 1, gt(), "", 255.0, vec![0.0, 2.0, 255.0]).unwrap();
        let c = r.into_categorical().unwrap();
        assert_eq!(c.as_categorical().unwrap(), &[0, 2, 255]);
    }
}
