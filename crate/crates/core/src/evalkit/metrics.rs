use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::domain::{EntitySpan, EntityTag, HelpLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PRF {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl PRF {
    /// Scores from raw counts; `support` is the number of gold items.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PRF {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

/// Precision, recall and F1 of the `CallForHelp` class.
pub fn binary_f1_positive(pred: &[HelpLabel], gold: &[HelpLabel]) -> Result<PRF> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        match (p.is_positive(), g.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(PRF::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    pub per_tag: BTreeMap<EntityTag, PRF>,
    /// Per-tag F1 weighted by gold support.
    pub weighted_f1: f64,
}

/// Exact-match entity scoring: a prediction counts only when tag, start and
/// end all equal a gold span of the same document.
pub fn conll_span_f1(pred: &[Vec<EntitySpan>], gold: &[Vec<EntitySpan>]) -> Result<SpanReport> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let mut counts: BTreeMap<EntityTag, (usize, usize, usize)> =
        EntityTag::ALL.iter().map(|t| (*t, (0, 0, 0))).collect();
    for (p, g) in pred.iter().zip(gold) {
        let gold_keys: HashSet<(EntityTag, usize, usize)> = g.iter().map(|s| (s.tag, s.start, s.end)).collect();
        let mut matched = HashSet::new();
        for s in p {
            let key = (s.tag, s.start, s.end);
            let c = counts.get_mut(&s.tag).expect("all tags present");
            if gold_keys.contains(&key) && matched.insert(key) {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        for s in g {
            if !matched.contains(&(s.tag, s.start, s.end)) {
                counts.get_mut(&s.tag).expect("all tags present").2 += 1;
            }
        }
    }
    let per_tag: BTreeMap<EntityTag, PRF> = counts
        .into_iter()
        .map(|(t, (tp, fp, fn_))| (t, PRF::from_counts(tp, fp, fn_)))
        .collect();
    let total: usize = per_tag.values().map(|p| p.support).sum();
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_tag.values().map(|p| p.f1 * p.support as f64).sum::<f64>() / total as f64
    };
    Ok(SpanReport { per_tag, weighted_f1 })
}
