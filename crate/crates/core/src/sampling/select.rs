use serde::{Deserialize, Serialize};

use super::{compute_quartiles, QuartileStats, ZonalStats};
use crate::error::{Error, Result};

pub const DEFAULT_RATIO_MIN: f64 = 0.1;
pub const DEFAULT_RATIO_MAX: f64 = 1.0;

/// Elimination counts per filter stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageReport {
    pub input: usize,
    pub stage1_removed: usize,
    pub stage3_removed: usize,
    pub ratio_removed: usize,
    pub selected: usize,
}

/// Result of [`select_samples`]: surviving stats in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<ZonalStats>,
    pub quartiles: Option<QuartileStats>,
    pub report: StageReport,
}

impl Selection {
    pub fn keys(&self) -> Vec<String> {
        self.selected.iter().map(|s| s.key.clone()).collect()
    }
}

/// Keeps cells that contain both flood and permanent water, are not in the
/// lower quartile on both counts, and whose water/flood ratio lies in
/// `[ratio_min, ratio_max]`.
///
/// Quartiles are taken over the cells that survive the first filter.
pub fn select_samples(stats: &[ZonalStats], ratio_min: f64, ratio_max: f64) -> Result<Selection> {
    if !(ratio_min <= ratio_max) {
        return Err(Error::Validation(format!(
            "ratio bounds out of order: [{ratio_min}, {ratio_max}]"
        )));
    }
    let mut report = StageReport {
        input: stats.len(),
        ..StageReport::default()
    };

    // Literal `< 1` comparison so fractional counts would behave the same.
    let stage1: Vec<&ZonalStats> = stats
        .iter()
        .filter(|s| !((s.rp100 as f64) < 1.0 || (s.pwb as f64) < 1.0))
        .collect();
    report.stage1_removed = stats.len() - stage1.len();

    if stage1.is_empty() {
        return Ok(Selection {
            selected: Vec::new(),
            quartiles: None,
            report,
        });
    }
    let owned: Vec<ZonalStats> = stage1.iter().map(|s| (*s).clone()).collect();
    let q = compute_quartiles(&owned)?;

    let mut selected = Vec::new();
    for s in owned {
        let (rp100, pwb) = (s.rp100 as f64, s.pwb as f64);
        if rp100 <= q.rp100_q1 && pwb <= q.pwb_q1 {
            report.stage3_removed += 1;
            continue;
        }
        let ratio = pwb / rp100;
        if ratio < ratio_min || ratio > ratio_max {
            report.ratio_removed += 1;
            continue;
        }
        selected.push(s);
    }
    report.selected = selected.len();
    Ok(Selection {
        selected,
        quartiles: Some(q),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(key: &str, rp100: u64, pwb: u64) -> ZonalStats {
        ZonalStats::new(key, rp100, pwb)
    }

    /// Naive filter: Q1 via integer position arithmetic over explicitly
    /// sorted survivor counts.
    fn oracle(stats: &[ZonalStats], lo: f64, hi: f64) -> Vec<String> {
        let survivors: Vec<&ZonalStats> = stats.iter().filter(|s| s.rp100 >= 1 && s.pwb >= 1).collect();
        if survivors.is_empty() {
            return vec![];
        }
        let q1 = |mut v: Vec<u64>| -> f64 {
            v.sort_unstable();
            let n = v.len();
            let (i, rem) = ((n - 1) / 4, (n - 1) % 4);
            if rem == 0 {
                v[i] as f64
            } else {
                v[i] as f64 + (rem as f64 / 4.0) * (v[i + 1] as f64 - v[i] as f64)
            }
        };
        let qr = q1(survivors.iter().map(|s| s.rp100).collect());
        let qp = q1(survivors.iter().map(|s| s.pwb).collect());
        survivors
            .into_iter()
            .filter(|s| !(s.rp100 as f64 <= qr && s.pwb as f64 <= qp))
            .filter(|s| {
                let r = s.pwb as f64 / s.rp100 as f64;
                r >= lo && r <= hi
            })
            .map(|s| s.key.clone())
            .collect()
    }

    #[test]
    fn hand_traced_fixture() {
        let stats = vec![
            s("A", 0, 5),
            s("B", 10, 0),
            s("C", 4, 2),
            s("D", 8, 4),
            s("E", 20, 10),
            s("F", 100, 50),
        ];
        let sel = select_samples(&stats, DEFAULT_RATIO_MIN, DEFAULT_RATIO_MAX).unwrap();
        assert_eq!(sel.keys(), ["D", "E", "F"]);
        assert_eq!(sel.quartiles, Some(QuartileStats { rp100_q1: 7.0, pwb_q1: 3.5 }));
        assert_eq!(
            sel.report,
            StageReport {
                input: 6,
                stage1_removed: 2,
                stage3_removed: 1,
                ratio_removed: 0,
                selected: 3
            }
        );
        assert_eq!(sel.keys(), oracle(&stats, 0.1, 1.0));
    }

    #[test]
    fn identical_stats_all_removed_at_q1() {
        let stats: Vec<_> = (0..5).map(|i| s(&i.to_string(), 10, 5)).collect();
        let sel = select_samples(&stats, 0.1, 1.0).unwrap();
        assert!(sel.selected.is_empty());
        assert_eq!(sel.report.stage3_removed, 5);
    }

    #[test]
    fn single_stat_removed_at_q1() {
        let sel = select_samples(&[s("x", 10, 5)], 0.1, 1.0).unwrap();
        assert!(sel.selected.is_empty());
        assert_eq!(sel.quartiles, Some(QuartileStats { rp100_q1: 10.0, pwb_q1: 5.0 }));
    }

    #[test]
    fn ratio_filter_bounds_are_inclusive() {
        let stats = vec![s("lo", 1, 1), s("a", 100, 10), s("b", 10, 10), s("c", 10, 11), s("d", 100, 9)];
        let sel = select_samples(&stats, 0.1, 1.0).unwrap();
        assert_eq!(sel.keys(), ["a", "b"]);
        assert_eq!(sel.report.ratio_removed, 2);
    }

    #[test]
    fn all_fail_stage_one() {
        let sel = select_samples(&[s("a", 0, 0), s("b", 3, 0)], 0.1, 1.0).unwrap();
        assert!(sel.selected.is_empty());
        assert_eq!(sel.quartiles, None);
        assert_eq!(sel.report.stage1_removed, 2);
    }

    fn arb_stats() -> impl Strategy<Value = Vec<ZonalStats>> {
        prop::collection::vec((0u64..60, 0u64..60), 0..120).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (a, b))| ZonalStats::new(format!("k{i}"), a, b))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_oracle(stats in arb_stats()) {
            let sel = select_samples(&stats, 0.1, 1.0).unwrap();
            prop_assert_eq!(sel.keys(), oracle(&stats, 0.1, 1.0));
            let r = sel.report;
            prop_assert_eq!(r.input, r.stage1_removed + r.stage3_removed + r.ratio_removed + r.selected);
            for kept in &sel.selected {
                prop_assert!(kept.rp100 >= 1 && kept.pwb >= 1);
                let ratio = kept.ratio.unwrap();
                prop_assert!((0.1..=1.0).contains(&ratio));
            }
        }

        #[test]
        fn membership_is_permutation_invariant(stats in arb_stats(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = stats.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = select_samples(&stats, 0.1, 1.0).unwrap();
            let b = select_samples(&shuffled, 0.1, 1.0).unwrap();
            let mut ka = a.keys();
            let mut kb = b.keys();
            ka.sort();
            kb.sort();
            prop_assert_eq!(ka, kb);
            prop_assert_eq!(a.quartiles, b.quartiles);
        }
    }
}
