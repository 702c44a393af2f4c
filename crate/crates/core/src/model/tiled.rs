//! Overlapping tiled inference over windows larger than the model input.

use super::network::ToyModel;
use super::tensor::FeatureMap;
use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::raster::RasterGrid;
use crate::scalar::Scalar;

/// Stacks single-band rasters that share a grid into one input tensor.
/// Nodata pixels (in any band) become 0 and are marked invalid.
pub fn stack_bands<T: Scalar>(bands: &[RasterGrid]) -> Result<(FeatureMap<T>, Vec<bool>)> {
    let first = bands
        .first()
        .ok_or_else(|| Error::Shape("no input bands".into()))?;
    let (w, h) = (first.width(), first.height());
    for b in bands {
        if (b.width(), b.height()) != (w, h) || b.transform() != first.transform() || b.crs_id() != first.crs_id() {
            return Err(Error::Shape("input bands must share dimensions, transform and crs".into()));
        }
    }
    let mut valid = vec![true; w * h];
    let mut data = Vec::with_capacity(bands.len() * w * h);
    for b in bands {
        for row in 0..h {
            for col in 0..w {
                let v = b.get(col, row);
                if b.is_nodata_value(v) || !v.is_finite() {
                    valid[row * w + col] = false;
                    data.push(T::zero());
                } else {
                    data.push(T::lit(v as f64));
                }
            }
        }
    }
    Ok((FeatureMap::from_vec(bands.len(), h, w, data)?, valid))
}

/// Window origins along one axis: stride `tile - overlap`, last window flush
/// with the end. Returns the window length too.
pub fn tile_starts(dim: usize, tile: usize, overlap: usize) -> (Vec<usize>, usize) {
    if dim <= tile {
        return (vec![0], dim);
    }
    let stride = tile - overlap;
    let mut starts = vec![0];
    let mut s = 0;
    while s + tile < dim {
        s = (s + stride).min(dim - tile);
        starts.push(s);
    }
    (starts, tile)
}

/// Average logit per pixel over all windows covering it.
pub fn tiled_logits<T: Scalar>(model: &ToyModel<T>, input: &FeatureMap<T>, tile: usize, overlap: usize) -> Result<Vec<T>> {
    if tile == 0 || overlap >= tile {
        return Err(Error::Validation(format!(
            "tile ({tile}) must exceed overlap ({overlap})"
        )));
    }
    let (h, w) = (input.height(), input.width());
    let (rows, th) = tile_starts(h, tile, overlap);
    let (cols, tw) = tile_starts(w, tile, overlap);
    if rows.len() == 1 && cols.len() == 1 {
        return Ok(model.logits(input)?.into_vec());
    }

    let mut sum = vec![T::zero(); h * w];
    let mut count = vec![0usize; h * w];
    for &r0 in &rows {
        for &c0 in &cols {
            let window = input.crop(r0, c0, th, tw);
            let logits = model.logits(&window)?;
            let l = logits.data();
            for r in 0..th {
                for c in 0..tw {
                    let i = (r0 + r) * w + c0 + c;
                    sum[i] = sum[i] + l[r * tw + c];
                    count[i] += 1;
                }
            }
        }
    }
    Ok(sum.into_iter().zip(count).map(|(s, n)| s / T::from_count(n)).collect())
}

/// Tiled prediction thresholded at probability `threshold`: a pixel is
/// flood when `sigmoid(mean logit) > threshold`.
pub fn predict_tiled<T: Scalar>(
    model: &ToyModel<T>,
    input: &FeatureMap<T>,
    valid: Option<&[bool]>,
    tile: usize,
    overlap: usize,
    threshold: f64,
) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Validation(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let logits = tiled_logits(model, input, tile, overlap)?;
    let t = T::lit(threshold);
    let pixels = logits
        .iter()
        .map(|&z| T::one() / (T::one() + (-z).exp()) > t)
        .collect();
    let mask = BinaryMask::new(input.width(), input.height(), pixels)?;
    match valid {
        Some(v) => mask.with_valid(v.to_vec()),
        None => Ok(mask),
    }
}

/// [`predict_tiled`] over co-registered single-band rasters.
pub fn predict_tiled_rasters<T: Scalar>(
    model: &ToyModel<T>,
    bands: &[RasterGrid],
    tile: usize,
    overlap: usize,
    threshold: f64,
) -> Result<BinaryMask> {
    let (input, valid) = stack_bands::<T>(bands)?;
    predict_tiled(model, &input, Some(&valid), tile, overlap, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_cover_the_axis() {
        assert_eq!(tile_starts(50, 64, 16), (vec![0], 50));
        assert_eq!(tile_starts(64, 64, 16), (vec![0], 64));
        assert_eq!(tile_starts(160, 64, 16), (vec![0, 48, 96], 64));
        assert_eq!(tile_starts(128, 64, 0), (vec![0, 64], 64));
        assert_eq!(tile_starts(100, 64, 0), (vec![0, 36], 64));
    }
}
