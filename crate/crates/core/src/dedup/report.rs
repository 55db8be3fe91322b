//! Verdict records, duplicate statistics and accuracy lower bounds.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

use super::{DuplicateVerdict, Label};

/// One JSON object per line.
pub fn write_verdicts(w: &mut impl Write, verdicts: &[DuplicateVerdict]) -> Result<()> {
    for v in verdicts {
        serde_json::to_writer(&mut *w, v)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_verdicts(r: impl BufRead) -> Result<Vec<DuplicateVerdict>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::format(format!("verdict line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DedupSummary {
    pub queries: usize,
    pub flagged_pairs: usize,
    /// Queries with at least one flagged neighbour.
    pub flagged_queries: usize,
    /// Queries with at least one neighbour labelled a duplicate by a reviewer.
    pub confirmed_queries: usize,
    pub unreviewable_pairs: usize,
    pub flagged_percent: String,
    pub confirmed_percent: String,
}

/// Counts over `verdicts` for a test set of `queries` images.
pub fn summarize(verdicts: &[DuplicateVerdict], queries: usize) -> DedupSummary {
    let flagged: BTreeSet<u64> = verdicts.iter().filter(|v| v.flagged).map(|v| v.query_id).collect();
    let confirmed: BTreeSet<u64> =
        verdicts.iter().filter(|v| v.label == Label::Duplicate).map(|v| v.query_id).collect();
    DedupSummary {
        queries,
        flagged_pairs: verdicts.iter().filter(|v| v.flagged).count(),
        flagged_queries: flagged.len(),
        confirmed_queries: confirmed.len(),
        unreviewable_pairs: verdicts.iter().filter(|v| v.distance.is_none()).count(),
        flagged_percent: format_percent(flagged.len(), queries),
        confirmed_percent: format_percent(confirmed.len(), queries),
    }
}

/// `count / total` as a percentage with two decimals, e.g. `"0.30%"`.
pub fn format_percent(count: usize, total: usize) -> String {
    if total == 0 {
        return "0.00%".into();
    }
    format!("{:.2}%", 100.0 * count as f64 / total as f64)
}

/// Accuracy if every test image with a training-set duplicate had been
/// misclassified: `max(0, acc − dups/test_size)`.
pub fn lower_bound_accuracy(measured: f64, duplicates: u64, test_size: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&measured) {
        return Err(Error::invalid(format!("measured accuracy must be in [0, 1], got {measured}")));
    }
    if test_size == 0 || duplicates > test_size {
        return Err(Error::invalid(format!(
            "duplicate count {duplicates} must be within a non-empty test set of {test_size}"
        )));
    }
    let bound = measured - duplicates as f64 / test_size as f64;
    if bound < 0.0 {
        log::warn!("{duplicates} duplicates exceed the correctly classified images; clamping to 0");
        return Ok(0.0);
    }
    Ok(bound)
}

/// Rounds a fraction to the nearest 0.1 percentage point.
pub fn round_display(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 1000.0
}
