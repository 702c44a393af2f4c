//! Candidate sample grid, zonal class counts, the FSM-based selection filter
//! and train/val/test splitting.

mod meta;
mod quartile;
mod select;
mod split;
mod zonal;

pub use meta::{create_vector_grid, extract_coordinates, read_metadata_csv, MetadataRecord};
pub use quartile::{compute_quartiles, quantile_linear, QuartileStats};
pub use select::{select_samples, Selection, StageReport, DEFAULT_RATIO_MAX, DEFAULT_RATIO_MIN};
pub use split::{split_dataset, ManifestEntry, SampleManifest, Split, SplitCounts, SplitRatios};
pub use zonal::zone_statistics;

use serde::{Deserialize, Serialize};

use crate::raster::BoundingBox;

/// One candidate sample location.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub key: String,
    pub center_x: f64,
    pub center_y: f64,
    pub tile_side: f64,
}

/// Square footprint of a candidate sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub key: String,
    pub bbox: BoundingBox,
}

/// Per-cell class pixel counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalStats {
    pub key: String,
    pub rp100: u64,
    pub pwb: u64,
    /// `pwb / rp100`, present iff `rp100 > 0`.
    pub ratio: Option<f64>,
    /// Set when the cell does not overlap the raster at all.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub outside_raster: bool,
}

impl ZonalStats {
    pub fn new(key: impl Into<String>, rp100: u64, pwb: u64) -> Self {
        Self {
            key: key.into(),
            rp100,
            pwb,
            ratio: (rp100 > 0).then(|| pwb as f64 / rp100 as f64),
            outside_raster: false,
        }
    }
}
