use std::collections::HashSet;
use std::path::Path;

use super::{GridCell, SampleMeta};
use crate::error::{Error, Result};
use crate::raster::BoundingBox;

/// Raw row of the sample metadata table. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetadataRecord {
    pub key: Option<String>,
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
}

impl MetadataRecord {
    pub fn new(key: &str, center_x: f64, center_y: f64) -> Self {
        Self {
            key: Some(key.to_owned()),
            center_x: Some(center_x),
            center_y: Some(center_y),
        }
    }
}

/// Reads a CSV with header `key,center_x,center_y` (extra columns ignored).
pub fn read_metadata_csv(path: impl AsRef<Path>) -> Result<Vec<MetadataRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_metadata(file)
}

pub(crate) fn parse_metadata<R: std::io::Read>(reader: R) -> Result<Vec<MetadataRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("metadata is missing column `{name}`")))
    };
    let (ki, xi, yi) = (column("key")?, column("center_x")?, column("center_y")?);

    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let text = |i: usize| row.get(i).filter(|s| !s.is_empty());
        let number = |i: usize, name: &str| -> Result<Option<f64>> {
            text(i)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::parse(format!("{name} (row {})", line + 1), format!("`{s}` is not a number"))
                    })
                })
                .transpose()
        };
        records.push(MetadataRecord {
            key: text(ki).map(str::to_owned),
            center_x: number(xi, "center_x")?,
            center_y: number(yi, "center_y")?,
        });
    }
    Ok(records)
}

/// Validates metadata records and attaches the configured tile side.
pub fn extract_coordinates(records: &[MetadataRecord], tile_side: f64) -> Result<Vec<SampleMeta>> {
    if !(tile_side > 0.0 && tile_side.is_finite()) {
        return Err(Error::Validation(format!("tile_side must be positive, got {tile_side}")));
    }
    let mut seen = HashSet::new();
    let mut duplicates: Vec<String> = Vec::new();
    let mut metas = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let missing = |field: &str| Error::Schema(format!("record {i} is missing `{field}`"));
        let key = rec.key.clone().ok_or_else(|| missing("key"))?;
        let center_x = rec.center_x.ok_or_else(|| missing("center_x"))?;
        let center_y = rec.center_y.ok_or_else(|| missing("center_y"))?;
        if !seen.insert(key.clone()) && !duplicates.contains(&key) {
            duplicates.push(key.clone());
        }
        metas.push(SampleMeta {
            key,
            center_x,
            center_y,
            tile_side,
        });
    }
    if !duplicates.is_empty() {
        return Err(Error::Validation(format!(
            "duplicate sample keys: {}",
            duplicates.join(", ")
        )));
    }
    Ok(metas)
}

/// One axis-aligned square per sample, centered on its coordinates.
pub fn create_vector_grid(metas: &[SampleMeta]) -> Vec<GridCell> {
    metas
        .iter()
        .map(|m| {
            let half = m.tile_side / 2.0;
            GridCell {
                key: m.key.clone(),
                bbox: BoundingBox {
                    min_x: m.center_x - half,
                    min_y: m.center_y - half,
                    max_x: m.center_x + half,
                    max_y: m.center_y + half,
                },
            }
        })
        .collect()
}
