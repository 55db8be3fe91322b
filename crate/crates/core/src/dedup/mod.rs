//! Two-stage near-duplicate detection.
//!
//! Stage 1 pulls approximate candidates from an [`InvertedIndex`]; stage 2
//! recomputes exact squared distances between L2-normalized uncompressed
//! descriptors and flags pairs under a threshold. Flagged queries get a short
//! review manifest of their nearest neighbours for human annotation.

mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivf::{InvertedIndex, Neighbor};
use crate::par;

pub use report::{
    format_percent, lower_bound_accuracy, read_verdicts, round_display, summarize, write_verdicts, DedupSummary,
};

/// Candidates requested per query.
pub const DEFAULT_CANDIDATES: usize = 128;
/// Exact squared-distance threshold on unit vectors (cosine ≥ 0.7).
pub const DEFAULT_THRESHOLD: f64 = 0.6;
/// Neighbours shown to annotators per flagged query.
pub const DEFAULT_REVIEW: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub query_id: u64,
    /// Ascending by approximate distance, then id; never contains the query.
    pub candidates: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryFailure {
    pub query_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Duplicate,
    Distinct,
    #[default]
    Unreviewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateVerdict {
    pub query_id: u64,
    pub neighbor_id: u64,
    /// Exact squared distance, absent when a descriptor was unavailable.
    pub distance: Option<f64>,
    pub flagged: bool,
    #[serde(default)]
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Lookup of uncompressed descriptors by image id.
pub trait ExactStore: Sync {
    fn exact(&self, id: u64) -> Option<&[f32]>;
}

impl ExactStore for HashMap<u64, Vec<f32>> {
    fn exact(&self, id: u64) -> Option<&[f32]> {
        self.get(&id).map(Vec::as_slice)
    }
}

impl ExactStore for BTreeMap<u64, Vec<f32>> {
    fn exact(&self, id: u64) -> Option<&[f32]> {
        self.get(&id).map(Vec::as_slice)
    }
}

/// One stage-1 query: its id and index-form vector, if available.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub id: u64,
    pub vector: Option<&'a [f32]>,
}

/// Approximate candidates for every query, in query order. A query without a
/// vector or with a malformed one yields a failure record; the rest proceed.
pub fn stage1(
    index: &InvertedIndex,
    queries: &[Query<'_>],
    k: usize,
    nprobe: usize,
) -> Vec<std::result::Result<CandidateSet, QueryFailure>> {
    par::map(queries, |q| {
        let fail = |reason: String| QueryFailure { query_id: q.id, reason };
        let v = q.vector.ok_or_else(|| fail("query descriptor missing".into()))?;
        // one extra slot in case the query itself is indexed
        let mut hits = index.search(v, k.saturating_add(1), nprobe).map_err(|e| fail(e.to_string()))?;
        hits.retain(|h| h.id != q.id);
        hits.truncate(k);
        Ok(CandidateSet { query_id: q.id, candidates: hits })
    })
}

/// `‖a/‖a‖ − b/‖b‖‖²` in double precision; `None` for zero vectors.
pub fn normalized_sq_distance(a: &[f32], b: &[f32]) -> Option<f64> {
    let na = a.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let nb = b.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = f64::from(x) / na - f64::from(y) / nb;
                d * d
            })
            .sum(),
    )
}

/// Exact re-rank of one candidate set. Verdicts keep candidate order;
/// candidates without a usable descriptor are returned unflagged with a note.
pub fn stage2(
    query_exact: &[f32],
    candidates: &CandidateSet,
    store: &impl ExactStore,
    threshold: f64,
) -> Result<Vec<DuplicateVerdict>> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::invalid(format!("threshold must be a non-negative number, got {threshold}")));
    }
    Ok(candidates
        .candidates
        .iter()
        .map(|c| {
            let (distance, note) = match store.exact(c.id) {
                None => (None, Some("exact descriptor missing".to_string())),
                Some(v) if v.len() != query_exact.len() => (
                    None,
                    Some(format!("exact descriptor has {} dimensions, query has {}", v.len(), query_exact.len())),
                ),
                Some(v) => match normalized_sq_distance(query_exact, v) {
                    Some(d) => (Some(d), None),
                    None => (None, Some("zero-norm descriptor".to_string())),
                },
            };
            DuplicateVerdict {
                query_id: candidates.query_id,
                neighbor_id: c.id,
                flagged: distance.is_some_and(|d| d <= threshold),
                distance,
                label: Label::Unreviewed,
                note,
            }
        })
        .collect())
}

/// The `n` nearest scored verdicts of a query, ascending by exact distance
/// then neighbour id, or `None` when nothing was flagged.
pub fn review_manifest(verdicts: &[DuplicateVerdict], n: usize) -> Option<Vec<DuplicateVerdict>> {
    if !verdicts.iter().any(|v| v.flagged) {
        return None;
    }
    let mut scored: Vec<DuplicateVerdict> = verdicts.iter().filter(|v| v.distance.is_some()).cloned().collect();
    scored.sort_by(|a, b| {
        a.distance.unwrap().total_cmp(&b.distance.unwrap()).then(a.neighbor_id.cmp(&b.neighbor_id))
    });
    if scored.len() < n {
        log::info!(
            "query {} has {} scored neighbours, fewer than the {n} requested for review",
            verdicts[0].query_id,
            scored.len()
        );
    }
    scored.truncate(n);
    Some(scored)
}
