//! Pixel-level agreement between predicted and reference flood masks.
//!
//! Hit rate (recall), true alarm rate (precision) and their harmonic mean,
//! all on a 0-100 scale. A metric whose denominator is zero is `None`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FsmClassMap, RasterGrid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
    valid: Option<Vec<bool>>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Truncated {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            valid: None,
        })
    }

    pub fn with_valid(mut self, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != self.pixels.len() {
            return Err(Error::Truncated {
                expected: self.pixels.len(),
                actual: valid.len(),
            });
        }
        self.valid = Some(valid);
        Ok(self)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![false; width * height],
            valid: None,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn valid(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().map_or(true, |v| v[i])
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn inverted(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|p| !p).collect(),
            ..self.clone()
        }
    }
}

/// Which FSM classes make up the reference flood mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    #[default]
    Rp100Only,
    Rp100PlusPwb,
}

impl std::str::FromStr for LabelPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp100_only" => Ok(Self::Rp100Only),
            "rp100_plus_pwb" => Ok(Self::Rp100PlusPwb),
            other => Err(Error::parse("fsm_label_policy", format!("unknown policy `{other}`"))),
        }
    }
}

impl LabelPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rp100Only => "rp100_only",
            Self::Rp100PlusPwb => "rp100_plus_pwb",
        }
    }
}

/// Reference mask from a categorical FSM raster; nodata pixels are invalid.
pub fn reference_mask(fsm: &RasterGrid, classes: FsmClassMap, policy: LabelPolicy) -> Result<BinaryMask> {
    let codes = fsm
        .as_categorical()
        .ok_or_else(|| Error::Validation("reference mask needs a categorical raster".into()))?;
    let nodata = fsm.nodata();
    let pixels = codes
        .iter()
        .map(|&c| {
            c == classes.flood_rp100 || (policy == LabelPolicy::Rp100PlusPwb && c == classes.permanent_water)
        })
        .collect();
    let valid = codes.iter().map(|&c| c as f32 != nodata).collect();
    BinaryMask::new(fsm.width(), fsm.height(), pixels)?.with_valid(valid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_, self.tn + o.tn)
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Confusion counts over pixels valid in both masks.
pub fn confusion(pred: &BinaryMask, reference: &BinaryMask) -> Result<ConfusionCounts> {
    if (pred.width, pred.height) != (reference.width, reference.height) {
        return Err(Error::Shape(format!(
            "prediction is {}x{} but reference is {}x{}",
            pred.width, pred.height, reference.width, reference.height
        )));
    }
    let mut c = ConfusionCounts::default();
    for (i, (&p, &r)) in pred.pixels.iter().zip(&reference.pixels).enumerate() {
        if !(pred.is_valid(i) && reference.is_valid(i)) {
            continue;
        }
        match (p, r) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn percent<T: Scalar>(num: u64, den: u64) -> Option<T> {
    (den > 0).then(|| T::lit(100.0) * T::from_u64(num).unwrap() / T::from_u64(den).unwrap())
}

/// `100 * tp / (tp + fn)`.
pub fn hit_rate<T: Scalar>(c: &ConfusionCounts) -> Option<T> {
    percent(c.tp, c.tp + c.fn_)
}

/// `100 * tp / (tp + fp)`.
pub fn true_alarm_rate<T: Scalar>(c: &ConfusionCounts) -> Option<T> {
    percent(c.tp, c.tp + c.fp)
}

/// Harmonic mean of HR and TAR; 0 when both are 0.
pub fn f1_from<T: Scalar>(hr: T, tar: T) -> T {
    let sum = hr + tar;
    if sum == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * hr * tar / sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scores<T> {
    pub hr: Option<T>,
    pub tar: Option<T>,
    pub f1: Option<T>,
}

impl<T: Scalar> Scores<T> {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let hr = hit_rate(c);
        let tar = true_alarm_rate(c);
        let f1 = match (hr, tar) {
            (Some(h), Some(t)) => Some(f1_from(h, t)),
            _ => None,
        };
        Self { hr, tar, f1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleScores<T> {
    pub key: String,
    pub counts: ConfusionCounts,
    pub scores: Scores<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Excluded {
    pub hr: usize,
    pub tar: usize,
    pub f1: usize,
}

/// Per-sample, micro (pooled counts) and macro (mean of defined per-sample
/// scores) results.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    pub per_sample: Vec<SampleScores<T>>,
    pub micro: Scores<T>,
    pub micro_counts: ConfusionCounts,
    pub macro_: Scores<T>,
    pub excluded: Excluded,
}

fn mean_defined<T: Scalar>(values: impl Iterator<Item = Option<T>>) -> (Option<T>, usize) {
    let (mut sum, mut n, mut missing) = (T::zero(), 0usize, 0usize);
    for v in values {
        match v {
            Some(v) => {
                sum = sum + v;
                n += 1;
            }
            None => missing += 1,
        }
    }
    ((n > 0).then(|| sum / T::from_count(n)), missing)
}

pub fn aggregate<T: Scalar>(samples: &[(String, ConfusionCounts)]) -> Result<MetricReport<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let per_sample: Vec<SampleScores<T>> = samples
        .iter()
        .map(|(key, c)| SampleScores {
            key: key.clone(),
            counts: *c,
            scores: Scores::from_counts(c),
        })
        .collect();
    let micro_counts: ConfusionCounts = samples.iter().map(|(_, c)| *c).sum();
    let (hr, ex_hr) = mean_defined(per_sample.iter().map(|s| s.scores.hr));
    let (tar, ex_tar) = mean_defined(per_sample.iter().map(|s| s.scores.tar));
    let (f1, ex_f1) = mean_defined(per_sample.iter().map(|s| s.scores.f1));
    Ok(MetricReport {
        per_sample,
        micro: Scores::from_counts(&micro_counts),
        micro_counts,
        macro_: Scores { hr, tar, f1 },
        excluded: Excluded {
            hr: ex_hr,
            tar: ex_tar,
            f1: ex_f1,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub key: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub hr: Option<f64>,
    pub tar: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresJson {
    pub hr: Option<f64>,
    pub tar: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroJson {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub hr: Option<f64>,
    pub tar: Option<f64>,
    pub f1: Option<f64>,
}

/// On-disk report layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub per_sample: Vec<SampleJson>,
    pub micro: MicroJson,
    #[serde(rename = "macro")]
    pub macro_: ScoresJson,
    pub excluded: Excluded,
}

impl<T: Scalar> MetricReport<T> {
    pub fn to_json_struct(&self) -> ReportJson {
        let f = |v: Option<T>| v.map(Scalar::as_f64);
        ReportJson {
            per_sample: self
                .per_sample
                .iter()
                .map(|s| SampleJson {
                    key: s.key.clone(),
                    tp: s.counts.tp,
                    fp: s.counts.fp,
                    fn_: s.counts.fn_,
                    tn: s.counts.tn,
                    hr: f(s.scores.hr),
                    tar: f(s.scores.tar),
                    f1: f(s.scores.f1),
                })
                .collect(),
            micro: MicroJson {
                tp: self.micro_counts.tp,
                fp: self.micro_counts.fp,
                fn_: self.micro_counts.fn_,
                tn: self.micro_counts.tn,
                hr: f(self.micro.hr),
                tar: f(self.micro.tar),
                f1: f(self.micro.f1),
            },
            macro_: ScoresJson {
                hr: f(self.macro_.hr),
                tar: f(self.macro_.tar),
                f1: f(self.macro_.f1),
            },
            excluded: self.excluded,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_struct())? + "\n")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }
}
