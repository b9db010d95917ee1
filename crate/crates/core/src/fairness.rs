//! Group fairness quantities over per-case quality scores.
//!
//! A case is a "high performer" when it clears the population top-quartile
//! bar for a metric (Q3 for higher-is-better scores, Q1 for lower-is-better
//! ones). Demographic parity difference (DPD) and disparate impact ratio
//! (DIR) compare groups' high-performer rates; the fairness gap compares
//! group means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::AuditTable;
use crate::error::{Error, Result};
use crate::stats::descriptive::{mean, quantile, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Orientation {
    /// Default orientation for the built-in metric columns.
    pub fn for_metric(metric: &str) -> Orientation {
        if metric.starts_with("hd95") {
            Orientation::LowerBetter
        } else {
            Orientation::HigherBetter
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binarized {
    pub threshold: f64,
    pub outcomes: Vec<bool>,
}

/// Mark the top-quartile scores; ties at the threshold count as high.
pub fn binarize_top_quartile(scores: &[f64], orientation: Orientation) -> Result<Binarized> {
    if scores.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "top-quartile binarization needs at least 4 scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let (threshold, outcomes) = match orientation {
        Orientation::HigherBetter => {
            let q3 = quantile(scores, 0.75);
            (q3, scores.iter().map(|&s| s >= q3).collect())
        }
        Orientation::LowerBetter => {
            let q1 = quantile(scores, 0.25);
            (q1, scores.iter().map(|&s| s <= q1).collect())
        }
    };
    Ok(Binarized {
        threshold,
        outcomes,
    })
}

/// High-performer flags with their group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub metric: String,
    pub orientation: Orientation,
    pub threshold: f64,
    pub outcomes: Vec<bool>,
    pub groups: Vec<String>,
}

impl OutcomeTable {
    pub fn new(
        metric: &str,
        scores: &[f64],
        groups: Vec<String>,
        orientation: Orientation,
    ) -> Result<Self> {
        if scores.len() != groups.len() {
            return Err(Error::invalid("scores and group labels differ in length"));
        }
        let b = binarize_top_quartile(scores, orientation)?;
        Ok(Self {
            metric: metric.to_string(),
            orientation,
            threshold: b.threshold,
            outcomes: b.outcomes,
            groups,
        })
    }

    /// Build directly from flags; used when the threshold is fixed elsewhere.
    pub fn from_outcomes(outcomes: Vec<bool>, groups: Vec<String>) -> Self {
        Self {
            metric: String::new(),
            orientation: Orientation::HigherBetter,
            threshold: f64::NAN,
            outcomes,
            groups,
        }
    }

    /// (high performers, size) of `group`.
    pub fn counts(&self, group: &str) -> (usize, usize) {
        self.outcomes
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| *g == group)
            .fold((0, 0), |(h, n), (&o, _)| (h + usize::from(o), n + 1))
    }

    /// P(high | group).
    pub fn rate(&self, group: &str) -> Result<f64> {
        let (high, n) = self.counts(group);
        if n == 0 {
            return Err(Error::InsufficientData(format!("group `{group}` is empty")));
        }
        Ok(high as f64 / n as f64)
    }
}

/// |P(high | a) − P(high | b)|.
pub fn dpd(outcomes: &OutcomeTable, a: &str, b: &str) -> Result<f64> {
    Ok((outcomes.rate(a)? - outcomes.rate(b)?).abs())
}

/// min(rate_a, rate_b) / max(rate_a, rate_b); `None` when both rates are 0.
pub fn dir(outcomes: &OutcomeTable, a: &str, b: &str) -> Result<Option<f64>> {
    let (ra, rb) = (outcomes.rate(a)?, outcomes.rate(b)?);
    let hi = ra.max(rb);
    Ok((hi > 0.0).then(|| ra.min(rb) / hi))
}

fn gap_of(groups: &[(String, Vec<f64>)]) -> Result<f64> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fairness gap needs at least 2 non-empty groups, got {}",
            groups.len()
        )));
    }
    let means: Vec<f64> = groups.iter().map(|(_, v)| mean(v)).collect();
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Largest minus smallest group mean of `metric` across `attribute` levels.
pub fn fairness_gap(table: &AuditTable, metric: &str, attribute: &str) -> Result<f64> {
    gap_of(&table.grouped(metric, attribute)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub n_high: usize,
    pub rate_high: f64,
    /// false when n is below the minimum group size; such groups are
    /// reported but never selected as a worst-case pair.
    pub sufficient_n: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDisparity {
    pub group_a: String,
    pub group_b: String,
    pub dpd: f64,
    pub dir: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstPair {
    pub group_a: String,
    pub group_b: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessResult {
    pub metric: String,
    pub attribute: String,
    pub orientation: Orientation,
    /// Population-level quartile bar used for every group.
    pub threshold: f64,
    pub n_included: usize,
    pub min_group_size: usize,
    pub groups: Vec<GroupSummary>,
    pub pairs: Vec<PairDisparity>,
    pub worst_dpd: Option<WorstPair>,
    pub worst_dir: Option<WorstPair>,
    pub gap: f64,
    pub max_mean_group: String,
    pub min_mean_group: String,
}

impl FairnessResult {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }
}

pub fn fairness_summary(
    table: &AuditTable,
    metric: &str,
    attribute: &str,
    orientation: Orientation,
    min_group_size: usize,
) -> Result<FairnessResult> {
    let grouped = table.grouped(metric, attribute)?;
    let gap = gap_of(&grouped)?;

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (g, v) in &grouped {
        scores.extend_from_slice(v);
        labels.extend(std::iter::repeat_n(g.clone(), v.len()));
    }
    let outcomes = OutcomeTable::new(metric, &scores, labels, orientation)?;

    let groups: Vec<GroupSummary> = grouped
        .iter()
        .map(|(g, v)| {
            let (n_high, n) = outcomes.counts(g);
            GroupSummary {
                group: g.clone(),
                n,
                mean: mean(v),
                sd: sample_sd(v),
                n_high,
                rate_high: n_high as f64 / n as f64,
                sufficient_n: n >= min_group_size,
            }
        })
        .collect();

    let mut pairs = Vec::new();
    let mut worst_dpd: Option<WorstPair> = None;
    let mut worst_dir: Option<WorstPair> = None;
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let d = dpd(&outcomes, &a.group, &b.group)?;
            let r = dir(&outcomes, &a.group, &b.group)?;
            if a.sufficient_n && b.sufficient_n {
                if worst_dpd.as_ref().is_none_or(|w| d > w.value) {
                    worst_dpd = Some(WorstPair {
                        group_a: a.group.clone(),
                        group_b: b.group.clone(),
                        value: d,
                    });
                }
                if let Some(r) = r {
                    if worst_dir.as_ref().is_none_or(|w| r < w.value) {
                        worst_dir = Some(WorstPair {
                            group_a: a.group.clone(),
                            group_b: b.group.clone(),
                            value: r,
                        });
                    }
                }
            }
            pairs.push(PairDisparity {
                group_a: a.group.clone(),
                group_b: b.group.clone(),
                dpd: d,
                dir: r,
            });
        }
    }

    let by_mean: BTreeMap<usize, f64> = groups.iter().map(|g| g.mean).enumerate().collect();
    let arg = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for (&i, &m) in &by_mean {
            if better(m, by_mean[&best]) {
                best = i;
            }
        }
        groups[best].group.clone()
    };

    Ok(FairnessResult {
        metric: metric.to_string(),
        attribute: attribute.to_string(),
        orientation,
        threshold: outcomes.threshold,
        n_included: scores.len(),
        min_group_size,
        max_mean_group: arg(|a, b| a > b),
        min_mean_group: arg(|a, b| a < b),
        groups,
        pairs,
        worst_dpd,
        worst_dir,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{bin_age, AuditRow, CaseRecord};

    #[test]
    fn quartile_binarization() {
        let s: Vec<f64> = (1..=8).map(f64::from).collect();
        let b = binarize_top_quartile(&s, Orientation::HigherBetter).unwrap();
        assert_eq!(b.threshold, 6.25);
        assert_eq!(
            b.outcomes,
            [false, false, false, false, false, false, true, true]
        );
        let b = binarize_top_quartile(&s, Orientation::LowerBetter).unwrap();
        assert_eq!(b.threshold, 2.75);
        assert_eq!(
            b.outcomes,
            [true, true, false, false, false, false, false, false]
        );

        let b = binarize_top_quartile(&[0.7; 6], Orientation::HigherBetter).unwrap();
        assert_eq!(b.threshold, 0.7);
        assert!(b.outcomes.iter().all(|&o| o));

        assert!(binarize_top_quartile(&[1.0, 2.0, 3.0], Orientation::HigherBetter).is_err());
        assert!(
            binarize_top_quartile(&[1.0, 2.0, 3.0, f64::NAN], Orientation::HigherBetter).is_err()
        );
    }

    fn outcomes(a: &[bool], b: &[bool]) -> OutcomeTable {
        let mut o = a.to_vec();
        o.extend_from_slice(b);
        let mut g = vec!["a".to_string(); a.len()];
        g.extend(vec!["b".to_string(); b.len()]);
        OutcomeTable::from_outcomes(o, g)
    }

    #[test]
    fn dpd_and_dir_formulas() {
        let t = outcomes(&[true, true, false, false], &[true, false, false, false]);
        assert_eq!(dpd(&t, "a", "b").unwrap(), 0.25);
        assert_eq!(dpd(&t, "b", "a").unwrap(), 0.25);
        assert_eq!(dir(&t, "a", "b").unwrap(), Some(0.5));
        assert_eq!(dpd(&t, "a", "a").unwrap(), 0.0);
        assert_eq!(dir(&t, "a", "a").unwrap(), Some(1.0));

        let t = outcomes(&[false, false], &[false, false, false]);
        assert_eq!(dir(&t, "a", "b").unwrap(), None);
        assert!(dpd(&t, "a", "zzz").is_err());
    }

    fn table(groups: &[(&str, Vec<f64>)]) -> AuditTable {
        let mut rows = Vec::new();
        for (g, vals) in groups {
            for (i, v) in vals.iter().enumerate() {
                rows.push(AuditRow {
                    record: CaseRecord {
                        case_id: format!("{g}-{i:03}"),
                        age_years: 50.0,
                        ethnicity: g.to_string(),
                        data_source: "S".into(),
                        expert_rating: None,
                    },
                    age_group: bin_age(50.0).unwrap(),
                    dice: *v,
                    hd95_mm: Some(10.0 * (1.0 - v)),
                });
            }
        }
        AuditTable::from_rows(rows).unwrap()
    }

    #[test]
    fn gap_from_group_means() {
        // three groups with means 0.8082 / 0.8204 / 0.8612
        let t = table(&[
            ("A", vec![0.8082 - 0.01, 0.8082 + 0.01]),
            ("B", vec![0.8204, 0.8204]),
            ("C", vec![0.8612 + 0.02, 0.8612 - 0.02]),
        ]);
        assert!((fairness_gap(&t, "dice", "ethnicity").unwrap() - 0.0530).abs() < 1e-12);

        let t = table(&[
            ("A", vec![0.7304; 3]),
            ("B", vec![0.7333; 3]),
            ("C", vec![0.7703; 3]),
        ]);
        assert!((fairness_gap(&t, "dice", "ethnicity").unwrap() - 0.0399).abs() < 1e-12);

        let t = table(&[("A", vec![0.5, 0.6]), ("B", vec![0.6, 0.5])]);
        assert!(fairness_gap(&t, "dice", "ethnicity").unwrap().abs() < 1e-15);

        let t = table(&[("A", vec![0.5, 0.6])]);
        assert!(fairness_gap(&t, "dice", "ethnicity").is_err());
    }

    #[test]
    fn identical_distributions_are_at_parity() {
        let vals: Vec<f64> = (0..20).map(|i| 0.5 + 0.02 * i as f64).collect();
        let t = table(&[("A", vals.clone()), ("B", vals)]);
        let r = fairness_summary(&t, "dice", "ethnicity", Orientation::HigherBetter, 5).unwrap();
        assert_eq!(r.worst_dpd.as_ref().unwrap().value, 0.0);
        assert_eq!(r.worst_dir.as_ref().unwrap().value, 1.0);
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.n_included, 40);
    }

    #[test]
    fn shifted_group_has_max_mean() {
        let base: Vec<f64> = (0..40).map(|i| 0.5 + 0.005 * i as f64).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.1).collect();
        let t = table(&[("A", base.clone()), ("B", base), ("C", shifted)]);
        let r = fairness_summary(&t, "dice", "ethnicity", Orientation::HigherBetter, 5).unwrap();
        assert_eq!(r.max_mean_group, "C");
        assert!((r.gap - 0.1).abs() < 1e-12);
        assert_eq!(r.pairs.len(), 3);
        let w = r.worst_dpd.unwrap();
        assert!(w.group_a == "C" || w.group_b == "C");
    }

    #[test]
    fn small_groups_excluded_from_worst_case() {
        let big: Vec<f64> = (0..30).map(|i| 0.5 + 0.01 * i as f64).collect();
        let t = table(&[("A", big.clone()), ("B", big), ("T", vec![0.99, 0.98])]);
        let r = fairness_summary(&t, "dice", "ethnicity", Orientation::HigherBetter, 5).unwrap();
        assert!(!r.group("T").unwrap().sufficient_n);
        let w = r.worst_dpd.unwrap();
        assert_eq!((w.group_a.as_str(), w.group_b.as_str()), ("A", "B"));
        // the tiny group still drives the gap
        assert_eq!(r.max_mean_group, "T");
    }

    #[test]
    fn lower_better_uses_first_quartile() {
        let vals: Vec<f64> = (0..20).map(|i| 0.5 + 0.02 * i as f64).collect();
        let t = table(&[("A", vals.clone()), ("B", vals)]);
        let r = fairness_summary(&t, "hd95_mm", "ethnicity", Orientation::LowerBetter, 5).unwrap();
        let hd: Vec<f64> = t
            .numeric("hd95_mm")
            .unwrap()
            .into_iter()
            .flatten()
            .collect();
        assert!((r.threshold - quantile(&hd, 0.25)).abs() < 1e-12);
    }
}
