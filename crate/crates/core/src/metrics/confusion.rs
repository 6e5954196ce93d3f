use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::MetricError;
use crate::types::{AnnotationSet, MqmCategory, Severity};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub per_category: BTreeMap<MqmCategory, CategoryCounts>,
}

impl ConfusionCounts {
    pub fn get(&self, category: MqmCategory) -> CategoryCounts {
        self.per_category.get(&category).copied().unwrap_or_default()
    }

    pub fn totals(&self) -> CategoryCounts {
        self.per_category
            .values()
            .fold(CategoryCounts::default(), |acc, c| CategoryCounts {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            })
    }
}

/// How a predicted finding is matched to a gold finding within one segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MatchMode {
    /// Same category; severity and subcategory ignored.
    #[default]
    CategoryCount,
    /// Same category and severity.
    SeverityAware,
}

type Key = (MqmCategory, Option<Severity>);

fn count_by_segment(sets: &[AnnotationSet], mode: MatchMode) -> BTreeMap<&str, BTreeMap<Key, u64>> {
    let mut out: BTreeMap<&str, BTreeMap<Key, u64>> = BTreeMap::new();
    for set in sets {
        let counts = out.entry(set.segment_id.as_str()).or_default();
        for a in &set.annotations {
            let severity = match mode {
                MatchMode::CategoryCount => None,
                MatchMode::SeverityAware => Some(a.severity),
            };
            *counts.entry((a.category, severity)).or_default() += 1;
        }
    }
    out
}

/// Per-category TP/FP/FN of predicted against gold findings.
///
/// Within a segment and matching key, `tp = min(pred, gold)`,
/// `fp = pred - tp`, `fn = gold - tp`; counts are summed over segments.
/// Several sets may share a segment id; their findings are pooled.
pub fn confusion(
    pred: &[AnnotationSet],
    gold: &[AnnotationSet],
    mode: MatchMode,
) -> Result<ConfusionCounts, MetricError> {
    let pred_counts = count_by_segment(pred, mode);
    let gold_counts = count_by_segment(gold, mode);
    let pred_ids: BTreeSet<&str> = pred_counts.keys().copied().collect();
    let gold_ids: BTreeSet<&str> = gold_counts.keys().copied().collect();
    if let Some(diff) = pred_ids.symmetric_difference(&gold_ids).next() {
        return Err(MetricError::SegmentIdMismatch(diff.to_string()));
    }

    let mut per_category: BTreeMap<MqmCategory, CategoryCounts> = MqmCategory::ALL
        .iter()
        .map(|c| (*c, CategoryCounts::default()))
        .collect();
    let empty = BTreeMap::new();
    for id in &pred_ids {
        let p = &pred_counts[id];
        let g = gold_counts.get(id).unwrap_or(&empty);
        let keys: BTreeSet<&Key> = p.keys().chain(g.keys()).collect();
        for key in keys {
            let np = p.get(key).copied().unwrap_or(0);
            let ng = g.get(key).copied().unwrap_or(0);
            let entry = per_category.get_mut(&key.0).expect("all categories present");
            let tp = np.min(ng);
            entry.tp += tp;
            entry.fp += np - tp;
            entry.fn_ += ng - tp;
        }
    }
    Ok(ConfusionCounts { per_category })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ErrorAnnotation;

    fn set(id: &str, findings: &[(MqmCategory, Severity)]) -> AnnotationSet {
        let mut s = AnnotationSet::new(id, "d");
        for (c, sev) in findings {
            s.annotations.push(ErrorAnnotation::new(*c, "x", *sev, "").unwrap());
        }
        s
    }

    use MqmCategory::{Accuracy, Style};
    use Severity::{Major, Minor};

    #[test]
    fn exact_match() {
        let c = confusion(
            &[set("1", &[(Accuracy, Major)])],
            &[set("1", &[(Accuracy, Major)])],
            MatchMode::CategoryCount,
        )
        .unwrap();
        assert_eq!(c.get(Accuracy), CategoryCounts { tp: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn spurious_prediction() {
        let c = confusion(
            &[set("1", &[(Style, Minor)])],
            &[set("1", &[])],
            MatchMode::CategoryCount,
        )
        .unwrap();
        assert_eq!(c.get(Style), CategoryCounts { tp: 0, fp: 1, fn_: 0 });
    }

    #[test]
    fn surplus_prediction() {
        let c = confusion(
            &[set("1", &[(Accuracy, Major), (Accuracy, Minor)])],
            &[set("1", &[(Accuracy, Major)])],
            MatchMode::CategoryCount,
        )
        .unwrap();
        assert_eq!(c.get(Accuracy), CategoryCounts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn severity_aware_is_stricter() {
        let pred = [set("1", &[(Accuracy, Minor)])];
        let gold = [set("1", &[(Accuracy, Major)])];
        let c = confusion(&pred, &gold, MatchMode::SeverityAware).unwrap();
        assert_eq!(c.get(Accuracy), CategoryCounts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn pooled_sets_and_mismatch() {
        let pred = [set("1", &[(Accuracy, Major)]), set("1", &[(Accuracy, Major)])];
        let gold = [set("1", &[(Accuracy, Major), (Accuracy, Minor)])];
        assert_eq!(
            confusion(&pred, &gold, MatchMode::CategoryCount)
                .unwrap()
                .get(Accuracy)
                .tp,
            2
        );
        assert_eq!(
            confusion(&[set("1", &[])], &[set("2", &[])], MatchMode::CategoryCount),
            Err(MetricError::SegmentIdMismatch("1".into()))
        );
    }
}
