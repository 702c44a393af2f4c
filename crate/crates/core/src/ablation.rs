//! Imaginary-modality ablation: train one model per modality subset on the
//! same data and tabulate held-out scores against the no-TiM baseline.

use std::fmt::Write as _;

use crate::error::Result;
use crate::metrics::{aggregate, confusion, Scores};
use crate::model::{format_modalities, predict_tiled, train, Modality, ModelConfig, Sample, ToyModel};
use crate::scalar::Scalar;

/// Baseline, singles, pairs, then all three.
pub const TIM_SETTINGS: [&[Modality]; 8] = [
    &[],
    &[Modality::S2],
    &[Modality::Dem],
    &[Modality::Lulc],
    &[Modality::S2, Modality::Dem],
    &[Modality::S2, Modality::Lulc],
    &[Modality::Dem, Modality::Lulc],
    &[Modality::S2, Modality::Dem, Modality::Lulc],
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub modalities: Vec<Modality>,
    /// Micro-averaged test scores.
    pub scores: Scores<f64>,
    pub best_epoch: usize,
}

/// Trains and evaluates `base` once per entry of `settings`, replacing only
/// the imaginary-modality set. Test predictions use a single window per
/// sample at probability threshold 0.5.
pub fn run_ablation<T: Scalar>(
    base: &ModelConfig,
    settings: &[&[Modality]],
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    test_set: &[Sample<T>],
) -> Result<Vec<AblationRow>> {
    settings
        .iter()
        .map(|mods| {
            let config = ModelConfig {
                tim_modalities: mods.to_vec(),
                ..base.clone()
            };
            let (model, state) = train(ToyModel::<T>::new(config)?, train_set, val_set)?;
            let counts = test_set
                .iter()
                .map(|s| {
                    let side = s.input.height().max(s.input.width());
                    let pred = predict_tiled(&model, &s.input, s.target.valid(), side, 0, 0.5)?;
                    Ok((s.key.clone(), confusion(&pred, &s.target)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AblationRow {
                modalities: mods.to_vec(),
                scores: aggregate::<f64>(&counts)?.micro,
                best_epoch: state.best_epoch,
            })
        })
        .collect()
}

fn cell(value: Option<f64>, baseline: Option<f64>, is_baseline: bool) -> String {
    match (value, baseline) {
        (None, _) => "n/a".to_owned(),
        (Some(v), _) if is_baseline => format!("{v:.2} (  -  )"),
        (Some(v), Some(b)) => format!("{v:.2} ({:+.2})", v - b),
        (Some(v), None) => format!("{v:.2} (n/a)"),
    }
}

/// Plain-text table with columns `TiM Setting | F1 | HR | TAR`; every cell
/// after the first row carries its difference to the first row.
pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} | {:<16} | {:<16} | {:<16}", "TiM Setting", "F1", "HR", "TAR");
    let _ = writeln!(out, "{}", "-".repeat(12 + 3 * 19));
    let Some(first) = rows.first() else {
        return out;
    };
    for (i, row) in rows.iter().enumerate() {
        let b = &first.scores;
        let s = &row.scores;
        let _ = writeln!(
            out,
            "{:<12} | {:<16} | {:<16} | {:<16}",
            format_modalities(&row.modalities),
            cell(s.f1, b.f1, i == 0),
            cell(s.hr, b.hr, i == 0),
            cell(s.tar, b.tar, i == 0),
        );
    }
    out
}
