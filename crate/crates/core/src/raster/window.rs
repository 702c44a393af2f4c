//! Windowing and grid alignment.

use super::{categorical_nodata, BoundingBox, GeoTransform, RasterData, RasterGrid};
use crate::error::{Error, Result};

/// Half-open pixel index range `[col0, col1) x [row0, row1)`; may extend past
/// the raster on any side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRange {
    pub col0: i64,
    pub col1: i64,
    pub row0: i64,
    pub row1: i64,
}

impl PixelRange {
    pub fn width(&self) -> usize {
        (self.col1 - self.col0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.row1 - self.row0).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    /// Intersection with `[0, width) x [0, height)`.
    pub fn clip(&self, width: usize, height: usize) -> PixelRange {
        PixelRange {
            col0: self.col0.clamp(0, width as i64),
            col1: self.col1.clamp(0, width as i64),
            row0: self.row0.clamp(0, height as i64),
            row1: self.row1.clamp(0, height as i64),
        }
    }
}

/// Pixels whose centers fall inside `bbox`, using `min_x <= x < max_x` and
/// `min_y < y <= max_y`.
pub fn pixel_range(transform: &GeoTransform, bbox: &BoundingBox) -> PixelRange {
    let col = |x: f64| ((x - transform.origin_x) / transform.pixel_w - 0.5).ceil() as i64;
    let row = |y: f64| ((transform.origin_y - y) / transform.pixel_h - 0.5).ceil() as i64;
    PixelRange {
        col0: col(bbox.min_x),
        col1: col(bbox.max_x),
        row0: row(bbox.max_y),
        row1: row(bbox.min_y),
    }
}

/// Extracts the pixels whose centers fall in `bbox`. Parts of the window
/// hanging over the raster edge are filled with nodata.
pub fn read_window(raster: &RasterGrid, bbox: &BoundingBox) -> Result<RasterGrid> {
    let range = pixel_range(raster.transform(), bbox);
    if range.is_empty() || range.clip(raster.width(), raster.height()).is_empty() {
        return Err(Error::EmptyWindow);
    }
    let (w, h) = (range.width(), range.height());
    let transform = raster.transform().offset(range.col0, range.row0);

    let source_index = |c: usize, r: usize| -> Option<usize> {
        let sc = range.col0 + c as i64;
        let sr = range.row0 + r as i64;
        if sc < 0 || sr < 0 || sc >= raster.width() as i64 || sr >= raster.height() as i64 {
            None
        } else {
            Some(sr as usize * raster.width() + sc as usize)
        }
    };

    let data = match raster.data() {
        RasterData::Continuous(src) => RasterData::Continuous(
            (0..h)
                .flat_map(|r| (0..w).map(move |c| (c, r)))
                .map(|(c, r)| source_index(c, r).map_or(raster.nodata(), |i| src[i]))
                .collect(),
        ),
        RasterData::Categorical(src) => {
            let fill = categorical_nodata(raster.nodata())?;
            RasterData::Categorical(
                (0..h)
                    .flat_map(|r| (0..w).map(move |c| (c, r)))
                    .map(|(c, r)| source_index(c, r).map_or(fill, |i| src[i]))
                    .collect(),
            )
        }
    };
    Ok(raster.with_data(w, h, transform, data))
}

/// Nearest-neighbour resampling of `source` onto a target grid: each target
/// pixel takes the source pixel containing its center, or nodata outside.
pub fn resample_nearest(
    source: &RasterGrid,
    target: &GeoTransform,
    width: usize,
    height: usize,
    target_crs: &str,
) -> Result<RasterGrid> {
    if source.crs_id() != target_crs {
        return Err(Error::CrsMismatch {
            left: source.crs_id().to_owned(),
            right: target_crs.to_owned(),
        });
    }
    let lookup: Vec<Option<usize>> = (0..height)
        .flat_map(|r| (0..width).map(move |c| (c, r)))
        .map(|(c, r)| {
            let (x, y) = target.pixel_center(c as i64, r as i64);
            let (sc, sr) = source.transform().world_to_pixel(x, y);
            (sc >= 0 && sr >= 0 && (sc as usize) < source.width() && (sr as usize) < source.height())
                .then(|| sr as usize * source.width() + sc as usize)
        })
        .collect();
    let data = match source.data() {
        RasterData::Continuous(src) => RasterData::Continuous(
            lookup.iter().map(|i| i.map_or(source.nodata(), |i| src[i])).collect(),
        ),
        RasterData::Categorical(src) => {
            let fill = categorical_nodata(source.nodata())?;
            RasterData::Categorical(lookup.iter().map(|i| i.map_or(fill, |i| src[i])).collect())
        }
    };
    Ok(source.with_data(width, height, *target, data))
}
