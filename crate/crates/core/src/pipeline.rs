//! End-to-end commands over a [`PipelineConfig`]: select, split, train,
//! evaluate and render. Every command writes its results under the
//! configured output directory and produces identical bytes when rerun on
//! identical inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, confusion, reference_mask, BinaryMask, MetricReport};
use crate::model::{predict_tiled, read_checkpoint, stack_bands, train, write_checkpoint, Sample, ToyModel, TrainState};
use crate::raster::{
    read_ascii_grid, read_binary_raster, resample_nearest, write_binary_raster, FsmClassMap, RasterGrid,
};
use crate::render::{mask_image, parse_pgm, raster_image, side_by_side, write_pgm, GrayImage};
use crate::sampling::{
    create_vector_grid, extract_coordinates, read_metadata_csv, select_samples, split_dataset, QuartileStats,
    SampleManifest, Split, SplitCounts, StageReport, ZonalStats, zone_statistics,
};
use crate::Real;

/// Contents of `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub keys: Vec<String>,
    pub quartiles: Option<QuartileStats>,
    pub report: StageReport,
    pub selected: Vec<ZonalStats>,
}

impl SelectionFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Summary of a training run, written to `train_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub train_keys: Vec<String>,
    pub val_keys: Vec<String>,
}

fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::file(path, e))
}

/// Reads a raster by extension: `.zfr` binary, anything else ASCII grid.
pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("zfr") => read_binary_raster(path),
        _ => read_ascii_grid(path),
    }
}

/// Reads the FSM raster, converting an ASCII grid to categorical codes.
pub fn read_fsm(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let raster = read_raster(path)?;
    match raster.as_categorical() {
        Some(_) => Ok(raster),
        None => raster.into_categorical(),
    }
}

/// Extract coordinates, build the cell grid, compute zonal statistics and
/// apply the selection filters. Writes `zonal_stats.json`,
/// `selection.json` and `stage_report.json`; an empty selection still
/// writes the files.
pub fn run_select(cfg: &PipelineConfig) -> Result<SelectionFile> {
    let records = read_metadata_csv(&cfg.metadata_csv)?;
    let metas = extract_coordinates(&records, cfg.tile_side)?;
    let cells = create_vector_grid(&metas);
    let fsm = read_fsm(&cfg.fsm_raster)?;
    let stats = zone_statistics(&cells, &fsm, FsmClassMap::STANDARD)?;
    let selection = select_samples(&stats, cfg.ratio_min, cfg.ratio_max)?;

    ensure_dir(&cfg.output_dir)?;
    write_json(&stats, &cfg.output_dir.join("zonal_stats.json"))?;
    let file = SelectionFile {
        keys: selection.keys(),
        quartiles: selection.quartiles,
        report: selection.report,
        selected: selection.selected,
    };
    write_json(&file, &cfg.selection_path())?;
    write_json(&file.report, &cfg.output_dir.join("stage_report.json"))?;
    Ok(file)
}

/// Splits a selection into train/val/test and writes `manifest.json`.
pub fn run_split(
    cfg: &PipelineConfig,
    selection: &Path,
    seed: Option<u64>,
    counts: Option<SplitCounts>,
) -> Result<SampleManifest> {
    let file = SelectionFile::read(selection)?;
    let manifest = split_dataset(
        &file.selected,
        cfg.split_ratios,
        seed.unwrap_or(cfg.split_seed),
        counts.or(cfg.split_counts),
    )?;
    ensure_dir(&cfg.output_dir)?;
    manifest.write(cfg.manifest_path())?;
    Ok(manifest)
}

/// Loads the input bands of `key` and its reference mask from the FSM
/// resampled onto the band grid. Pixels that are nodata in any band or in
/// the FSM are invalid.
pub fn load_sample(cfg: &PipelineConfig, fsm: &RasterGrid, key: &str, bands: usize) -> Result<Sample<Real>> {
    let rasters = (0..bands)
        .map(|b| read_raster(cfg.band_path(key, b)))
        .collect::<Result<Vec<_>>>()?;
    let (input, input_valid) = stack_bands::<Real>(&rasters)?;
    let grid = &rasters[0];
    let fsm_tile = resample_nearest(fsm, grid.transform(), grid.width(), grid.height(), grid.crs_id())?;
    let reference = reference_mask(&fsm_tile, FsmClassMap::STANDARD, cfg.label_policy)?;
    let valid = (0..reference.pixels().len())
        .map(|i| input_valid[i] && reference.is_valid(i))
        .collect();
    let target = reference.with_valid(valid)?;
    Sample::new(key, input, target)
}

fn load_split(cfg: &PipelineConfig, fsm: &RasterGrid, manifest: &SampleManifest, split: Split, bands: usize) -> Result<Vec<Sample<Real>>> {
    manifest
        .keys(split)
        .iter()
        .map(|k| load_sample(cfg, fsm, k, bands))
        .collect()
}

/// Trains on the manifest's train split with early stopping on its val
/// split. Writes `model.zfm`, `train_log.csv` and `train_summary.json`.
pub fn run_train(cfg: &PipelineConfig, manifest: &Path) -> Result<(ToyModel<Real>, TrainState<Real>)> {
    let manifest = SampleManifest::read(manifest)?;
    let fsm = read_fsm(&cfg.fsm_raster)?;
    let bands = cfg.model.in_channels;
    let train_set = load_split(cfg, &fsm, &manifest, Split::Train, bands)?;
    let val_set = load_split(cfg, &fsm, &manifest, Split::Val, bands)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Validation(format!(
            "manifest needs non-empty train and val splits, has {} and {}",
            train_set.len(),
            val_set.len()
        )));
    }
    let (model, state) = train(ToyModel::<Real>::new(cfg.model.clone())?, &train_set, &val_set)?;

    ensure_dir(&cfg.output_dir)?;
    write_checkpoint(&model, cfg.checkpoint_path())?;
    let log = cfg.output_dir.join("train_log.csv");
    std::fs::write(&log, state.log_csv()).map_err(|e| Error::file(&log, e))?;
    let summary = TrainSummary {
        epochs_run: state.epoch,
        best_epoch: state.best_epoch,
        best_val_loss: state.val_loss[state.best_epoch - 1] as f64,
        stopped_early: state.stopped_early,
        train_keys: manifest.keys(Split::Train),
        val_keys: manifest.keys(Split::Val),
    };
    write_json(&summary, &cfg.output_dir.join("train_summary.json"))?;
    Ok((model, state))
}

/// Categorical raster of a prediction: 1 flood, 0 dry, 255 invalid.
pub fn mask_raster(mask: &BinaryMask, like: &RasterGrid) -> Result<RasterGrid> {
    let codes = (0..mask.pixels().len())
        .map(|i| match (mask.is_valid(i), mask.pixels()[i]) {
            (false, _) => 255,
            (true, true) => 1,
            (true, false) => 0,
        })
        .collect();
    RasterGrid::categorical(mask.width(), mask.height(), *like.transform(), like.crs_id(), 255, codes)
}

/// Tiled prediction over every test sample, scored against the reference
/// masks. Writes `pred/<key>.zfr` and `report.json`.
pub fn run_eval(
    cfg: &PipelineConfig,
    checkpoint: &Path,
    manifest: &Path,
    threshold: Option<f64>,
) -> Result<MetricReport<f64>> {
    let threshold = threshold.unwrap_or(cfg.threshold);
    let model = read_checkpoint::<Real>(checkpoint)?;
    let manifest = SampleManifest::read(manifest)?;
    let fsm = read_fsm(&cfg.fsm_raster)?;
    let pred_dir = cfg.output_dir.join("pred");
    ensure_dir(&pred_dir)?;

    let mut counts = Vec::new();
    for key in manifest.keys(Split::Test) {
        let sample = load_sample(cfg, &fsm, &key, model.config().in_channels)?;
        let pred = predict_tiled(
            &model,
            &sample.input,
            sample.target.valid(),
            cfg.inference_tile,
            cfg.inference_overlap,
            threshold,
        )?;
        let like = read_raster(cfg.band_path(&key, 0))?;
        write_binary_raster(&mask_raster(&pred, &like)?, pred_dir.join(format!("{key}.zfr")))?;
        counts.push((key, confusion(&pred, &sample.target)?));
    }
    let report = aggregate::<f64>(&counts)?;
    report.write(cfg.output_dir.join("report.json"))?;
    Ok(report)
}

fn load_image(path: &Path) -> Result<GrayImage> {
    if path.extension().and_then(|e| e.to_str()) == Some("pgm") {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        parse_pgm(&bytes)
    } else {
        Ok(raster_image(&read_raster(path)?))
    }
}

/// Renders one or more rasters (or PGM images) into a single PGM; several
/// inputs are placed side by side.
pub fn render_files(inputs: &[PathBuf], out: &Path, gap: usize) -> Result<GrayImage> {
    let images = inputs.iter().map(|p| load_image(p)).collect::<Result<Vec<_>>>()?;
    let img = match images.len() {
        1 => images.into_iter().next().unwrap(),
        _ => side_by_side(&images, gap)?,
    };
    write_pgm(&img, out)?;
    Ok(img)
}

/// For every prediction under `pred/`, writes `render/<key>.pgm` with the
/// first input band, the reference mask and the prediction side by side.
/// Returns the rendered keys in sorted order.
pub fn run_render(cfg: &PipelineConfig) -> Result<Vec<String>> {
    let pred_dir = cfg.output_dir.join("pred");
    let mut keys: Vec<String> = std::fs::read_dir(&pred_dir)
        .map_err(|e| Error::file(&pred_dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "zfr").then(|| path.file_stem()?.to_str().map(str::to_owned))?
        })
        .collect();
    keys.sort();
    let fsm = read_fsm(&cfg.fsm_raster)?;
    let out_dir = cfg.output_dir.join("render");
    ensure_dir(&out_dir)?;
    for key in &keys {
        let band = read_raster(cfg.band_path(key, 0))?;
        let sample = load_sample(cfg, &fsm, key, 1)?;
        let pred = read_binary_raster(pred_dir.join(format!("{key}.zfr")))?;
        let img = side_by_side(&[raster_image(&band), mask_image(&sample.target), raster_image(&pred)], 2)?;
        write_pgm(&img, out_dir.join(format!("{key}.pgm")))?;
    }
    Ok(keys)
}
