//! Corpus statistics: lengths, dependency ratios, scene sizes, op mix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use editforge_core::chain::ChainRecord;
use editforge_core::ops::OpKind;
use serde::{Deserialize, Serialize};

/// Dependency ratios are binned in tenths; a ratio of exactly 1 goes in
/// the last bin.
pub const RATIO_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub records: usize,
    pub mean_length: f64,
    pub length_histogram: BTreeMap<usize, usize>,
    pub mean_dependency_ratio: f64,
    pub dependency_histogram: Vec<usize>,
    /// Distinct labels in the initial scene.
    pub mean_unique_objects: f64,
    pub op_counts: BTreeMap<OpKind, usize>,
    /// Share of all ops per kind.
    pub op_fractions: BTreeMap<OpKind, f64>,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn compute(records: &[ChainRecord]) -> StatsReport {
    let n = records.len();
    let mut length_histogram = BTreeMap::new();
    let mut dependency_histogram = vec![0; RATIO_BINS];
    let mut op_counts: BTreeMap<OpKind, usize> = OpKind::ALL.iter().map(|k| (*k, 0)).collect();
    let (mut len_sum, mut ratio_sum, mut unique_sum) = (0.0, 0.0, 0.0);
    for r in records {
        *length_histogram.entry(r.len()).or_insert(0) += 1;
        len_sum += r.len() as f64;
        ratio_sum += r.dependency_ratio;
        let bin = ((r.dependency_ratio * RATIO_BINS as f64).floor() as usize).min(RATIO_BINS - 1);
        dependency_histogram[bin] += 1;
        unique_sum += r.init_state.objects.values().map(|o| o.label.as_str()).collect::<BTreeSet<_>>().len() as f64;
        for op in &r.ops {
            *op_counts.entry(op.kind()).or_insert(0) += 1;
        }
    }
    let total_ops: usize = op_counts.values().sum();
    let op_fractions = op_counts.iter().map(|(k, c)| (*k, mean(*c as f64, total_ops))).collect();
    StatsReport {
        records: n,
        mean_length: mean(len_sum, n),
        length_histogram,
        mean_dependency_ratio: mean(ratio_sum, n),
        dependency_histogram,
        mean_unique_objects: mean(unique_sum, n),
        op_counts,
        op_fractions,
    }
}

impl StatsReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "records             {}", self.records);
        let _ = writeln!(s, "mean length         {:.3}", self.mean_length);
        let _ = writeln!(s, "mean dependency     {:.3}", self.mean_dependency_ratio);
        let _ = writeln!(s, "mean unique objects {:.3}", self.mean_unique_objects);
        let _ = writeln!(s, "\nlength  chains");
        for (len, c) in &self.length_histogram {
            let _ = writeln!(s, "{len:>6}  {c}");
        }
        let _ = writeln!(s, "\ndependency ratio  chains");
        for (bin, c) in self.dependency_histogram.iter().enumerate() {
            let lo = bin as f64 / RATIO_BINS as f64;
            let _ = writeln!(s, "{lo:.1}-{:.1}           {c}", lo + 1.0 / RATIO_BINS as f64);
        }
        let _ = writeln!(s, "\nop kind            count  share");
        for (kind, c) in &self.op_counts {
            let name = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let _ = writeln!(s, "{name:<18} {c:>5}  {:.3}", self.op_fractions[kind]);
        }
        s
    }
}
