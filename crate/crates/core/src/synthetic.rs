//! Seeded synthetic scenes: smooth fields, thresholded masks and a complete
//! on-disk fixture for the command-line pipeline.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::model::{FeatureMap, Sample};
use crate::raster::{write_binary_raster, GeoTransform, RasterGrid};
use crate::scalar::Scalar;

/// Sum of random Gaussian bumps, rescaled to `[0, 1]`. Row-major. Bump
/// widths span 8% to 25% of the longer side.
pub fn smooth_field(width: usize, height: usize, bumps: usize, seed: u64) -> Vec<f64> {
    let scale = width.max(height) as f64;
    bump_field(width, height, bumps, (0.08 * scale, 0.25 * scale), seed)
}

/// [`smooth_field`] with bump standard deviations drawn from `sigma`
/// (pixels, half-open range).
pub fn bump_field(width: usize, height: usize, bumps: usize, sigma: (f64, f64), seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
                rng.gen_range(sigma.0..sigma.1),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let mut field: Vec<f64> = (0..height)
        .flat_map(|r| (0..width).map(move |c| (c as f64, r as f64)))
        .map(|(x, y)| {
            params
                .iter()
                .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum()
        })
        .collect();
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    field.iter_mut().for_each(|v| *v = (*v - lo) / span);
    field
}

/// Tiles whose target is `input > threshold` on a single smooth channel.
pub fn separable_tiles<T: Scalar>(count: usize, size: usize, threshold: f64, seed: u64) -> Vec<Sample<T>> {
    (0..count)
        .map(|i| {
            let field = smooth_field(size, size, 6, seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let target = field.iter().map(|&v| v > threshold).collect();
            let input = FeatureMap::from_vec(1, size, size, field.iter().map(|&v| T::lit(v)).collect())
                .expect("shape");
            Sample::new(format!("tile{i:03}"), input, BinaryMask::new(size, size, target).expect("shape"))
                .expect("shape")
        })
        .collect()
}

/// Layout of an on-disk pipeline fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    /// Candidate cells per side.
    pub grid: usize,
    /// Pixels per cell side.
    pub tile_px: usize,
    pub pixel_size: f64,
    pub seed: u64,
    /// Emit an all-background FSM raster.
    pub dry: bool,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            grid: 8,
            tile_px: 32,
            pixel_size: 10.0,
            seed: 7,
            dry: false,
        }
    }
}

pub const FIXTURE_CRS: &str = "EPSG:32633";

/// Writes `fsm.zfr`, `samples.csv`, `eo/<key>.b0.zfr` and `pipeline.cfg`
/// under `dir`.
///
/// The EO band is a smooth field. Pixels above its 60th percentile are wet;
/// a second independent field decides which wet pixels are permanent water
/// and which are rp100 flood, so the flood-or-water label is a threshold of
/// the input band.
pub fn write_fixture(dir: impl AsRef<Path>, spec: &FixtureSpec) -> Result<()> {
    let dir = dir.as_ref();
    let eo_dir = dir.join("eo");
    std::fs::create_dir_all(&eo_dir).map_err(|e| Error::file(&eo_dir, e))?;

    let side = spec.grid * spec.tile_px;
    let bumps = 4 * spec.grid * spec.grid;
    let px = spec.tile_px as f64;
    let field = bump_field(side, side, bumps, (0.3 * px, 0.7 * px), spec.seed);
    let splitter = bump_field(side, side, bumps, (0.15 * px, 0.35 * px), spec.seed ^ 0x5eed);
    let percentile = |values: &[f64], p: f64| {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted[((sorted.len() - 1) as f64 * p) as usize]
    };
    let wet_t = percentile(&field, 0.60);
    let water_t = percentile(&splitter, 0.80);

    let origin = (500_000.0, 4_100_000.0);
    let transform = GeoTransform::new(origin.0, origin.1, spec.pixel_size, spec.pixel_size)?;
    let codes: Vec<u8> = field
        .iter()
        .zip(&splitter)
        .map(|(&v, &w)| match () {
            _ if spec.dry || v <= wet_t => 0,
            _ if w > water_t => 2,
            _ => 1,
        })
        .collect();
    let fsm = RasterGrid::categorical(side, side, transform, FIXTURE_CRS, 255, codes)?;
    write_binary_raster(&fsm, dir.join("fsm.zfr"))?;

    let tile_side = spec.tile_px as f64 * spec.pixel_size;
    let mut csv = String::from("key,center_x,center_y\n");
    for gy in 0..spec.grid {
        for gx in 0..spec.grid {
            let key = format!("S{gy:02}{gx:02}");
            let cx = origin.0 + (gx as f64 + 0.5) * tile_side;
            let cy = origin.1 - (gy as f64 + 0.5) * tile_side;
            let _ = writeln!(csv, "{key},{cx},{cy}");

            let mut values = Vec::with_capacity(spec.tile_px * spec.tile_px);
            for r in 0..spec.tile_px {
                let row = gy * spec.tile_px + r;
                let start = row * side + gx * spec.tile_px;
                values.extend(field[start..start + spec.tile_px].iter().map(|&v| v as f32));
            }
            let t = transform.offset((gx * spec.tile_px) as i64, (gy * spec.tile_px) as i64);
            let tile = RasterGrid::continuous(spec.tile_px, spec.tile_px, t, FIXTURE_CRS, -9999.0, values)?;
            write_binary_raster(&tile, eo_dir.join(format!("{key}.b0.zfr")))?;
        }
    }
    let csv_path = dir.join("samples.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::file(&csv_path, e))?;

    let cfg = format!(
        "# synthetic fixture\n\
         paths.fsm_raster = fsm.zfr\n\
         paths.metadata_csv = samples.csv\n\
         paths.eo_raster_dir = eo\n\
         paths.output_dir = out\n\
         sampling.tile_side = {tile_side}\n\
         sampling.ratio_min = 0.1\n\
         sampling.ratio_max = 1.0\n\
         split.seed = 11\n\
         labels.policy = rp100_plus_pwb\n\
         model.in_channels = 1\n\
         model.base_channels = 8\n\
         model.decoder_depth = 2\n\
         model.decoder_channels = 8\n\
         model.learning_rate = 0.5\n\
         model.max_epochs = 200\n\
         model.patience = 25\n\
         model.seed = 3\n\
         inference.tile = {tile}\n\
         inference.overlap = 0\n\
         inference.threshold = 0.5\n",
        tile = spec.tile_px,
    );
    let cfg_path = dir.join("pipeline.cfg");
    std::fs::write(&cfg_path, cfg).map_err(|e| Error::file(&cfg_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_is_normalised_and_seeded() {
        let a = smooth_field(16, 8, 4, 1);
        assert_eq!(a.len(), 128);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, smooth_field(16, 8, 4, 1));
        assert_ne!(a, smooth_field(16, 8, 4, 2));
    }

    #[test]
    fn separable_targets_follow_threshold() {
        let tiles = separable_tiles::<f64>(2, 16, 0.5, 9);
        for t in &tiles {
            for (i, &p) in t.target.pixels().iter().enumerate() {
                assert_eq!(p, t.input.data()[i] > 0.5);
            }
        }
    }
}
