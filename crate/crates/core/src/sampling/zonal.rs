use super::{GridCell, ZonalStats};
use crate::error::{Error, Result};
use crate::raster::{pixel_range, FsmClassMap, RasterGrid};

/// Counts flood (rp100) and permanent-water pixels whose centers fall inside
/// each cell. Cells that miss the raster get zero counts and `outside_raster`.
pub fn zone_statistics(cells: &[GridCell], fsm: &RasterGrid, classes: FsmClassMap) -> Result<Vec<ZonalStats>> {
    let codes = fsm
        .as_categorical()
        .ok_or_else(|| Error::Validation("zone statistics need a categorical FSM raster".into()))?;
    let width = fsm.width();

    Ok(cells
        .iter()
        .map(|cell| {
            let full = pixel_range(fsm.transform(), &cell.bbox);
            let clipped = full.clip(fsm.width(), fsm.height());
            if clipped.is_empty() {
                let mut stats = ZonalStats::new(cell.key.clone(), 0, 0);
                stats.outside_raster = true;
                return stats;
            }
            let (mut rp100, mut pwb) = (0u64, 0u64);
            for row in clipped.row0 as usize..clipped.row1 as usize {
                let line = &codes[row * width + clipped.col0 as usize..row * width + clipped.col1 as usize];
                for &code in line {
                    if code == classes.flood_rp100 {
                        rp100 += 1;
                    } else if code == classes.permanent_water {
                        pwb += 1;
                    }
                }
            }
            ZonalStats::new(cell.key.clone(), rp100, pwb)
        })
        .collect())
}
