use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ZonalStats;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    /// Floor for val and test, remainder to train.
    pub fn counts_for(&self, n: usize) -> Result<SplitCounts> {
        let sum = self.train + self.val + self.test;
        if [self.train, self.val, self.test].iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split ratios must be non-negative and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        // small epsilon keeps exact products like 0.2 * 10 from flooring down
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        Ok(SplitCounts {
            train: n - val - test,
            val,
            test,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: String,
    pub rp100: u64,
    pub pwb: u64,
    pub ratio: Option<f64>,
    pub split: Split,
}

/// Persisted split assignment. Entries keep the order of the selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub counts: SplitCounts,
    pub entries: Vec<ManifestEntry>,
}

impl SampleManifest {
    pub fn keys(&self, split: Split) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.key.clone())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: Self = serde_json::from_str(text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        if let Some(dup) = self.entries.iter().find(|e| !seen.insert(e.key.as_str())) {
            return Err(Error::Validation(format!("duplicate manifest key `{}`", dup.key)));
        }
        let tally = |s: Split| self.entries.iter().filter(|e| e.split == s).count();
        let actual = SplitCounts {
            train: tally(Split::Train),
            val: tally(Split::Val),
            test: tally(Split::Test),
        };
        if actual != self.counts {
            return Err(Error::Validation(format!(
                "manifest counts {:?} do not match entries {:?}",
                self.counts, actual
            )));
        }
        Ok(())
    }
}

/// Seeded shuffle followed by contiguous assignment to train, val, test.
pub fn split_dataset(
    samples: &[ZonalStats],
    ratios: SplitRatios,
    seed: u64,
    explicit_counts: Option<SplitCounts>,
) -> Result<SampleManifest> {
    let n = samples.len();
    let counts = match explicit_counts {
        Some(c) if c.total() != n => {
            return Err(Error::Validation(format!(
                "explicit split counts {}+{}+{} = {} do not sum to {n} samples",
                c.train,
                c.val,
                c.test,
                c.total()
            )))
        }
        Some(c) => c,
        None => ratios.counts_for(n)?,
    };
    let mut seen = HashSet::new();
    if let Some(dup) = samples.iter().find(|s| !seen.insert(s.key.as_str())) {
        return Err(Error::Validation(format!("duplicate sample key `{}`", dup.key)));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        assignment[i] = if rank < counts.train {
            Split::Train
        } else if rank < counts.train + counts.val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let entries = samples
        .iter()
        .zip(assignment)
        .map(|(s, split)| ManifestEntry {
            key: s.key.clone(),
            rp100: s.rp100,
            pwb: s.pwb,
            ratio: s.ratio,
            split,
        })
        .collect();
    Ok(SampleManifest { seed, counts, entries })
}
