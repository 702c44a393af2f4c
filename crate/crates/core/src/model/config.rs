use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    S1,
    S2,
    Dem,
    Lulc,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::S1, Modality::S2, Modality::Dem, Modality::Lulc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::S1 => "S1",
            Modality::S2 => "S2",
            Modality::Dem => "DEM",
            Modality::Lulc => "LULC",
        }
    }

    pub(crate) fn id(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Ok(Modality::S1),
            "s2" => Ok(Modality::S2),
            "dem" => Ok(Modality::Dem),
            "lulc" => Ok(Modality::Lulc),
            other => Err(Error::parse("modality", format!("unknown modality `{other}`"))),
        }
    }
}

/// Parses a comma-separated modality list; empty, `-` and `none` mean no modalities.
pub fn parse_modalities(s: &str) -> Result<Vec<Modality>> {
    let s = s.trim();
    if s.is_empty() || s == "-" || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split([',', '+']).map(str::parse).collect()
}

pub fn format_modalities(m: &[Modality]) -> String {
    if m.is_empty() {
        "-".to_owned()
    } else {
        m.iter().map(Modality::as_str).collect::<Vec<_>>().join("+")
    }
}

/// Hyperparameters of the toy segmentation model and its trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_modality: Modality,
    pub in_channels: usize,
    pub base_channels: usize,
    /// Imaginary modalities, in channel order.
    pub tim_modalities: Vec<Modality>,
    pub tim_channels_per_modality: usize,
    pub decoder_depth: usize,
    pub decoder_channels: usize,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_modality: Modality::S1,
            in_channels: 1,
            base_channels: 16,
            tim_modalities: Vec::new(),
            tim_channels_per_modality: 8,
            decoder_depth: 3,
            decoder_channels: 8,
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            learning_rate: 0.5,
            max_epochs: 200,
            patience: 10,
            batch_size: 1,
            seed: 0,
        }
    }
}

const KEYS: [&str; 14] = [
    "input_modality",
    "in_channels",
    "base_channels",
    "tim_modalities",
    "tim_channels_per_modality",
    "decoder_depth",
    "decoder_channels",
    "focal_gamma",
    "focal_alpha",
    "learning_rate",
    "max_epochs",
    "patience",
    "batch_size",
    "seed",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::parse(key, format!("cannot parse `{}`", value.trim())))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.in_channels == 0 || self.base_channels == 0 || self.decoder_channels == 0 {
            return fail("channel counts must be positive".into());
        }
        if !self.tim_modalities.is_empty() && self.tim_channels_per_modality == 0 {
            return fail("tim_channels_per_modality must be positive".into());
        }
        if self.tim_modalities.contains(&self.input_modality) {
            return fail(format!(
                "imaginary modalities must exclude the input modality {}",
                self.input_modality
            ));
        }
        let mut sorted = self.tim_modalities.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.tim_modalities.len() {
            return fail("imaginary modalities contain duplicates".into());
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return fail(format!("focal_gamma must be >= 0, got {}", self.focal_gamma));
        }
        if !(self.focal_alpha > 0.0 && self.focal_alpha <= 1.0) {
            return fail(format!("focal_alpha must be in (0, 1], got {}", self.focal_alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return fail("max_epochs and batch_size must be positive".into());
        }
        if self.decoder_depth > 8 {
            return fail("decoder_depth above 8 is not supported".into());
        }
        Ok(())
    }

    /// Channels entering the decoder after imaginary-modality expansion.
    pub fn expanded_channels(&self) -> usize {
        self.base_channels + self.tim_modalities.len() * self.tim_channels_per_modality
    }

    /// Spatial dimensions must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << self.decoder_depth
    }

    pub fn keys() -> &'static [&'static str] {
        &KEYS
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input_modality" => self.input_modality = value.parse()?,
            "in_channels" => self.in_channels = num(key, value)?,
            "base_channels" => self.base_channels = num(key, value)?,
            "tim_modalities" => self.tim_modalities = parse_modalities(value)?,
            "tim_channels_per_modality" => self.tim_channels_per_modality = num(key, value)?,
            "decoder_depth" => self.decoder_depth = num(key, value)?,
            "decoder_channels" => self.decoder_channels = num(key, value)?,
            "focal_gamma" => self.focal_gamma = num(key, value)?,
            "focal_alpha" => self.focal_alpha = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(Error::parse(other, "unknown model key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "input_modality" => self.input_modality.to_string(),
            "in_channels" => self.in_channels.to_string(),
            "base_channels" => self.base_channels.to_string(),
            "tim_modalities" => format_modalities(&self.tim_modalities),
            "tim_channels_per_modality" => self.tim_channels_per_modality.to_string(),
            "decoder_depth" => self.decoder_depth.to_string(),
            "decoder_channels" => self.decoder_channels.to_string(),
            "focal_gamma" => self.focal_gamma.to_string(),
            "focal_alpha" => self.focal_alpha.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// `key = value` lines, one per field, in a fixed order.
    pub fn to_kv(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap()))
            .collect()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
