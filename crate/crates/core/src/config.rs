//! Pipeline configuration file.
//!
//! One `section.key = value` pair per line; `#` starts a comment line and
//! blank lines are ignored. Relative paths resolve against the directory
//! holding the file.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `paths.fsm_raster` | categorical FSM raster (`.zfr` or ASCII grid) | required |
//! | `paths.metadata_csv` | sample metadata with `key,center_x,center_y` | required |
//! | `paths.eo_raster_dir` | directory of `<key>.b<i>.zfr` input bands | required |
//! | `paths.output_dir` | where every command writes its results | required |
//! | `sampling.tile_side` | sample footprint side, world units | required |
//! | `sampling.ratio_min`, `sampling.ratio_max` | water/flood ratio bounds | 0.1, 1.0 |
//! | `split.seed` | shuffle seed | 0 |
//! | `split.counts` | explicit `train,val,test` counts | unset |
//! | `split.ratios` | `train,val,test` fractions | 0.6,0.2,0.2 |
//! | `labels.policy` | `rp100_only` or `rp100_plus_pwb` | `rp100_only` |
//! | `model.<field>` | any [`ModelConfig`] field | see [`ModelConfig`] |
//! | `inference.tile`, `inference.overlap` | tiled prediction window | 64, 16 |
//! | `inference.threshold` | probability threshold | 0.5 |

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::LabelPolicy;
use crate::model::ModelConfig;
use crate::sampling::{SplitCounts, SplitRatios, DEFAULT_RATIO_MAX, DEFAULT_RATIO_MIN};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fsm_raster: PathBuf,
    pub metadata_csv: PathBuf,
    pub eo_raster_dir: PathBuf,
    pub output_dir: PathBuf,
    pub tile_side: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub split_seed: u64,
    pub split_counts: Option<SplitCounts>,
    pub split_ratios: SplitRatios,
    pub label_policy: LabelPolicy,
    pub model: ModelConfig,
    pub inference_tile: usize,
    pub inference_overlap: usize,
    pub threshold: f64,
}

const PATH_KEYS: [&str; 4] = ["paths.fsm_raster", "paths.metadata_csv", "paths.eo_raster_dir", "paths.output_dir"];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(key, format!("cannot parse `{value}`")))
}

fn triple<T: std::str::FromStr>(key: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::parse(key, format!("expected three comma-separated values, got `{value}`")));
    }
    Ok([number(key, parts[0])?, number(key, parts[1])?, number(key, parts[2])?])
}

/// Parses `train,val,test` counts such as `186,62,66`.
pub fn parse_counts(value: &str) -> Result<SplitCounts> {
    let [train, val, test] = triple::<usize>("split.counts", value)?;
    Ok(SplitCounts { train, val, test })
}

impl PipelineConfig {
    /// Parses config text; relative paths are joined onto `base_dir`.
    /// Paths are not checked here, see [`PipelineConfig::load`].
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut paths: [Option<PathBuf>; 4] = Default::default();
        let mut tile_side = None;
        let mut cfg = PipelineConfig {
            fsm_raster: PathBuf::new(),
            metadata_csv: PathBuf::new(),
            eo_raster_dir: PathBuf::new(),
            output_dir: PathBuf::new(),
            tile_side: 0.0,
            ratio_min: DEFAULT_RATIO_MIN,
            ratio_max: DEFAULT_RATIO_MAX,
            split_seed: 0,
            split_counts: None,
            split_ratios: SplitRatios::default(),
            label_policy: LabelPolicy::default(),
            model: ModelConfig::default(),
            inference_tile: 64,
            inference_overlap: 16,
            threshold: 0.5,
        };
        let mut seen = HashSet::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) {
                return Err(Error::parse(key, "given more than once"));
            }
            if let Some(i) = PATH_KEYS.iter().position(|k| *k == key) {
                if value.is_empty() {
                    return Err(Error::parse(key, "empty path"));
                }
                paths[i] = Some(base_dir.join(value));
                continue;
            }
            match key {
                "sampling.tile_side" => tile_side = Some(number::<f64>(key, value)?),
                "sampling.ratio_min" => cfg.ratio_min = number(key, value)?,
                "sampling.ratio_max" => cfg.ratio_max = number(key, value)?,
                "split.seed" => cfg.split_seed = number(key, value)?,
                "split.counts" => cfg.split_counts = Some(parse_counts(value)?),
                "split.ratios" => {
                    let [train, val, test] = triple(key, value)?;
                    cfg.split_ratios = SplitRatios { train, val, test };
                }
                "labels.policy" => cfg.label_policy = value.parse()?,
                "inference.tile" => cfg.inference_tile = number(key, value)?,
                "inference.overlap" => cfg.inference_overlap = number(key, value)?,
                "inference.threshold" => cfg.threshold = number(key, value)?,
                _ => match key.strip_prefix("model.") {
                    Some(field) => cfg.model.set(field, value)?,
                    None => return Err(Error::parse(key, "unknown configuration key")),
                },
            }
        }

        let [fsm, meta, eo, out] = paths;
        let take = |p: Option<PathBuf>, i: usize| p.ok_or_else(|| Error::parse(PATH_KEYS[i], "missing required key"));
        cfg.fsm_raster = take(fsm, 0)?;
        cfg.metadata_csv = take(meta, 1)?;
        cfg.eo_raster_dir = take(eo, 2)?;
        cfg.output_dir = take(out, 3)?;
        cfg.tile_side = tile_side.ok_or_else(|| Error::parse("sampling.tile_side", "missing required key"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a config file, and checks that every
    /// input path exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.check_inputs()?;
        Ok(cfg)
    }

    pub fn check_inputs(&self) -> Result<()> {
        for (name, p) in [
            ("paths.fsm_raster", &self.fsm_raster),
            ("paths.metadata_csv", &self.metadata_csv),
            ("paths.eo_raster_dir", &self.eo_raster_dir),
        ] {
            if !p.exists() {
                return Err(Error::Validation(format!("{name}: `{}` does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.tile_side.is_finite() && self.tile_side > 0.0) {
            return bad(format!("sampling.tile_side must be positive, got {}", self.tile_side));
        }
        if !(self.ratio_min.is_finite() && self.ratio_max.is_finite() && 0.0 <= self.ratio_min && self.ratio_min <= self.ratio_max) {
            return bad(format!(
                "sampling ratio bounds must satisfy 0 <= min <= max, got [{}, {}]",
                self.ratio_min, self.ratio_max
            ));
        }
        self.split_ratios.counts_for(0)?;
        if self.inference_tile == 0 || self.inference_overlap >= self.inference_tile {
            return bad(format!(
                "inference.tile ({}) must exceed inference.overlap ({})",
                self.inference_tile, self.inference_overlap
            ));
        }
        if self.inference_tile % self.model.divisor() != 0 {
            return bad(format!(
                "inference.tile ({}) must be a multiple of {}",
                self.inference_tile,
                self.model.divisor()
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("inference.threshold must lie in [0, 1], got {}", self.threshold));
        }
        self.model.validate()
    }

    pub fn selection_path(&self) -> PathBuf {
        self.output_dir.join("selection.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join("manifest.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("model.zfm")
    }

    /// Path of input band `band` for sample `key`.
    pub fn band_path(&self, key: &str, band: usize) -> PathBuf {
        self.eo_raster_dir.join(format!("{key}.b{band}.zfr"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "paths.fsm_raster = fsm.zfr\n\
                           paths.metadata_csv = m.csv\n\
                           paths.eo_raster_dir = eo\n\
                           paths.output_dir = out\n\
                           sampling.tile_side = 320\n";

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = PipelineConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.fsm_raster, PathBuf::from("/data/fsm.zfr"));
        assert_eq!(cfg.tile_side, 320.0);
        assert_eq!(cfg.label_policy, LabelPolicy::Rp100Only);
        assert_eq!(cfg.split_counts, None);
        assert_eq!(cfg.model, ModelConfig::default());
    }

    #[test]
    fn overrides_and_comments() {
        let text = format!(
            "{MINIMAL}# comment\n\nsplit.counts = 186, 62, 66\nlabels.policy = rp100_plus_pwb\nmodel.tim_modalities = S2+DEM\n"
        );
        let cfg = PipelineConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.split_counts, Some(SplitCounts { train: 186, val: 62, test: 66 }));
        assert_eq!(cfg.label_policy, LabelPolicy::Rp100PlusPwb);
        assert_eq!(cfg.model.tim_modalities.len(), 2);
    }

    #[test]
    fn errors_name_the_key() {
        let missing = MINIMAL.replace("sampling.tile_side = 320\n", "");
        let err = PipelineConfig::parse(&missing, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("sampling.tile_side"), "{err}");

        for (extra, key) in [
            ("bogus.key = 1", "bogus.key"),
            ("split.seed = x", "split.seed"),
            ("sampling.tile_side = 5", "sampling.tile_side"),
        ] {
            let err = PipelineConfig::parse(&format!("{MINIMAL}{extra}\n"), Path::new(".")).unwrap_err();
            assert!(err.to_string().contains(key), "{err}");
        }
        assert!(PipelineConfig::parse(&format!("{MINIMAL}sampling.ratio_min = 2\n"), Path::new(".")).is_err());
        assert!(PipelineConfig::parse(&format!("{MINIMAL}no equals sign\n"), Path::new(".")).is_err());
    }

    #[test]
    fn load_checks_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("p.cfg");
        std::fs::write(&cfg_path, MINIMAL).unwrap();
        let err = PipelineConfig::load(&cfg_path).unwrap_err();
        assert!(err.to_string().contains("paths.fsm_raster"), "{err}");
    }
}
