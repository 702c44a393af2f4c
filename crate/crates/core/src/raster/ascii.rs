//! ESRI ASCII Grid reader/writer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GeoTransform, RasterData, RasterGrid};
use crate::error::{Error, Result};

const DEFAULT_NODATA: f32 = -9999.0;

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<(f64, bool)>,
    yll: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<f32>,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: Option<&str>) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::parse(key, "missing value"))?;
    raw.parse()
        .map_err(|_| Error::parse(key, format!("cannot parse `{raw}`")))
}

/// Reads an ESRI ASCII Grid as a continuous raster.
///
/// Both `xllcorner`/`yllcorner` and `xllcenter`/`yllcenter` are accepted.
/// Use [`RasterGrid::into_categorical`] for class-coded grids.
pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_ascii_grid(&text)
}

pub(crate) fn parse_ascii_grid(text: &str) -> Result<RasterGrid> {
    let mut header = Header::default();
    let mut lines = text.lines().peekable();

    while let Some(line) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else {
            lines.next();
            continue;
        };
        if first.parse::<f64>().is_ok() {
            break;
        }
        let key = first.to_ascii_lowercase();
        let value = tokens.next();
        match key.as_str() {
            "ncols" => header.ncols = Some(parse_value(first, value)?),
            "nrows" => header.nrows = Some(parse_value(first, value)?),
            "xllcorner" => header.xll = Some((parse_value(first, value)?, false)),
            "xllcenter" => header.xll = Some((parse_value(first, value)?, true)),
            "yllcorner" => header.yll = Some((parse_value(first, value)?, false)),
            "yllcenter" => header.yll = Some((parse_value(first, value)?, true)),
            "cellsize" => header.cellsize = Some(parse_value(first, value)?),
            "nodata_value" => header.nodata = Some(parse_value(first, value)?),
            _ => return Err(Error::parse(first, "unknown header key")),
        }
        lines.next();
    }

    let ncols = header.ncols.ok_or_else(|| Error::parse("ncols", "missing"))?;
    let nrows = header.nrows.ok_or_else(|| Error::parse("nrows", "missing"))?;
    let (xll, x_center) = header.xll.ok_or_else(|| Error::parse("xllcorner", "missing"))?;
    let (yll, y_center) = header.yll.ok_or_else(|| Error::parse("yllcorner", "missing"))?;
    let cellsize = header.cellsize.ok_or_else(|| Error::parse("cellsize", "missing"))?;
    if !(cellsize > 0.0) {
        return Err(Error::parse("cellsize", "must be positive"));
    }
    let nodata = header.nodata.unwrap_or(DEFAULT_NODATA);

    let left = if x_center { xll - cellsize / 2.0 } else { xll };
    let bottom = if y_center { yll - cellsize / 2.0 } else { yll };
    let transform = GeoTransform::new(left, bottom + nrows as f64 * cellsize, cellsize, cellsize)?;

    let expected = ncols * nrows;
    let mut values = Vec::with_capacity(expected);
    for (i, token) in lines.flat_map(str::split_whitespace).enumerate() {
        let v: f32 = token
            .parse()
            .map_err(|_| Error::parse(format!("value #{i}"), format!("cannot parse `{token}`")))?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: values.len(),
        });
    }

    RasterGrid::new(ncols, nrows, transform, "", nodata, RasterData::Continuous(values))
}

/// Writes a raster as ESRI ASCII Grid. Square pixels are required.
pub fn write_ascii_grid(raster: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_ascii_grid(raster)?).map_err(|e| Error::file(path, e))
}

pub(crate) fn format_ascii_grid(raster: &RasterGrid) -> Result<String> {
    let t = raster.transform();
    if t.pixel_w != t.pixel_h {
        return Err(Error::Validation(
            "ESRI ASCII Grid requires square pixels".into(),
        ));
    }
    let extent = raster.extent();
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", raster.width());
    let _ = writeln!(out, "nrows {}", raster.height());
    let _ = writeln!(out, "xllcorner {}", extent.min_x);
    let _ = writeln!(out, "yllcorner {}", extent.min_y);
    let _ = writeln!(out, "cellsize {}", t.pixel_w);
    let _ = writeln!(out, "NODATA_value {}", raster.nodata());
    for row in 0..raster.height() {
        let line: Vec<String> = (0..raster.width())
            .map(|col| raster.get(col, row).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}
