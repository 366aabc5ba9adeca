//! Verdicts, witnesses and per-condition reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Inconclusive,
    Violated,
}

impl Verdict {
    /// The more severe of two verdicts (`violated` > `inconclusive` > `holds`).
    pub fn worst(self, other: Verdict) -> Verdict {
        self.max(other)
    }
}

/// A concrete configuration attached to a verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub points: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Witness {
    pub fn new(kind: impl Into<String>) -> Self {
        Witness { kind: kind.into(), ..Default::default() }
    }

    pub fn point(mut self, name: &str, p: &Vector) -> Self {
        self.points.insert(name.to_string(), p.iter().copied().collect());
        self
    }

    /// Records a scalar; non-finite values are stored as their sign-preserving clamp.
    pub fn value(mut self, name: &str, v: f64) -> Self {
        self.values.insert(name.to_string(), finite(v));
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Clamps infinities to `±f64::MAX` and maps NaN to zero so reports stay valid JSON.
pub fn finite(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(f64::MIN, f64::MAX)
    }
}

/// Fixed-width histogram over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Option<Self> {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        let mut counts = vec![0u64; bins];
        let width = hi - lo;
        for &v in values {
            let b = if width > 0.0 { (((v - lo) / width) * bins as f64) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        Some(Histogram { lo, hi, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Outcome of one condition check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    /// Finer classification where the condition has one (e.g. `A3s` / `A3w`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Smallest normalized slack found; negative means a violation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_margin: Option<f64>,
    #[serde(default)]
    pub estimates: BTreeMap<String, f64>,
    #[serde(default)]
    pub witnesses: Vec<Witness>,
    pub n_checked: usize,
    pub n_excluded: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

impl ConditionReport {
    pub fn new(condition: impl Into<String>) -> Self {
        ConditionReport {
            condition: condition.into(),
            verdict: Verdict::Holds,
            label: None,
            worst_margin: None,
            estimates: BTreeMap::new(),
            witnesses: Vec::new(),
            n_checked: 0,
            n_excluded: 0,
            notes: Vec::new(),
            histogram: None,
        }
    }

    pub fn estimate(&mut self, name: &str, v: f64) {
        self.estimates.insert(name.to_string(), finite(v));
    }

    pub fn observe_margin(&mut self, margin: f64) {
        let m = finite(margin);
        self.worst_margin = Some(self.worst_margin.map_or(m, |w| w.min(m)));
    }

    pub fn escalate(&mut self, v: Verdict) {
        self.verdict = self.verdict.worst(v);
    }

    pub fn estimate_or(&self, name: &str, default: f64) -> f64 {
        self.estimates.get(name).copied().unwrap_or(default)
    }
}

/// Running minimum with lowest-index tie-break, for deterministic argmin reductions.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgMin<T> {
    pub value: f64,
    pub index: usize,
    pub item: T,
}

impl<T> ArgMin<T> {
    pub fn better(&self, other: &ArgMin<T>) -> bool {
        self.value < other.value || (self.value == other.value && self.index < other.index)
    }

    pub fn pick(a: Option<ArgMin<T>>, b: Option<ArgMin<T>>) -> Option<ArgMin<T>> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.better(&a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_verdict_ordering() {
        assert_eq!(Verdict::Holds.worst(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Violated.worst(Verdict::Inconclusive), Verdict::Violated);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::from_values(&[0.0, 0.5, 1.0, 1.0], 4).unwrap();
        assert_eq!(h.total(), 4);
        assert_eq!(h.counts[3], 2);
        assert!(Histogram::from_values(&[], 4).is_none());
    }

    #[test]
    fn argmin_breaks_ties_by_index() {
        let a = Some(ArgMin { value: 1.0, index: 3, item: () });
        let b = Some(ArgMin { value: 1.0, index: 1, item: () });
        assert_eq!(ArgMin::pick(a, b).unwrap().index, 1);
    }
}
