use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use wildset_core::dedup::{
    review_manifest, stage1, stage2, summarize, write_verdicts, DuplicateVerdict, ExactStore, Query,
};
use wildset_core::descriptor::{DType, DescriptorFile};
use wildset_core::ivf::read_index;
use wildset_core::par;

use super::index::index_vectors;
use super::{read_descriptors, read_quantizers};
use crate::run::Run;

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    quantizers: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Query images in 8-bit storage form.
    #[arg(long)]
    queries: PathBuf,
    /// Id of the first query row. Queries that are also indexed must keep
    /// their index id so they are not reported as their own duplicate.
    #[arg(long, default_value_t = 0)]
    query_first_id: u64,
    /// Uncompressed descriptors of the indexed images (f32 rows).
    #[arg(long)]
    exact: PathBuf,
    /// Id of the first row of --exact.
    #[arg(long, default_value_t = 0)]
    exact_first_id: u64,
    /// Uncompressed descriptors of the queries (f32 rows, same order as --queries).
    #[arg(long)]
    query_exact: PathBuf,
    /// Every scored candidate, as JSON lines.
    #[arg(long)]
    out: PathBuf,
    /// Review manifests for flagged queries, as JSON lines.
    #[arg(long)]
    review: Option<PathBuf>,
    /// Summary counts as JSON; printed when not given.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    nprobe: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    review_size: Option<usize>,
}

/// Rows of an f32 file addressed by `first_id + row`.
struct RowStore<'a> {
    rows: &'a [f32],
    dim: usize,
    first_id: u64,
}

impl ExactStore for RowStore<'_> {
    fn exact(&self, id: u64) -> Option<&[f32]> {
        let i = usize::try_from(id.checked_sub(self.first_id)?).ok()?;
        self.rows.get(i * self.dim..(i + 1) * self.dim)
    }
}

fn rows(file: &DescriptorFile) -> (&[f32], usize) {
    match file {
        DescriptorFile::F32 { dim, rows } => (rows, *dim),
        _ => unreachable!("dtype checked"),
    }
}

pub fn run(a: DedupArgs, run: &mut Run) -> Result<()> {
    let dc = &mut run.config.dedup;
    dc.candidates = a.candidates.unwrap_or(dc.candidates);
    dc.threshold = a.threshold.unwrap_or(dc.threshold);
    dc.review = a.review_size.unwrap_or(dc.review);
    run.config.index.nprobe = a.nprobe.unwrap_or(run.config.index.nprobe);
    run.config.validate()?;
    let (k, threshold, review) = (run.config.dedup.candidates, run.config.dedup.threshold, run.config.dedup.review);
    let nprobe = run.config.index.nprobe;

    let set = read_quantizers(run, &a.quantizers)?;
    let index = {
        let mut r = run.open("--index", &a.index)?;
        read_index(&mut r, &set.coarse, &set.residual).with_context(|| format!("--index: {}", a.index.display()))?
    };
    let queries = read_descriptors(run, "--queries", &a.queries, DType::U8)?;
    let exact = read_descriptors(run, "--exact", &a.exact, DType::F32)?;
    let query_exact = read_descriptors(run, "--query-exact", &a.query_exact, DType::F32)?;
    if exact.dim() != query_exact.dim() {
        bail!("--query-exact: rows have {} dimensions, --exact has {}", query_exact.dim(), exact.dim());
    }
    if query_exact.count() < queries.count() {
        log::warn!(
            "--query-exact has {} rows for {} queries; the rest are reported as unscorable",
            query_exact.count(),
            queries.count()
        );
    }

    let vectors = run.time("encode", || index_vectors(&set, &queries, "--queries"))?;
    let d = set.index_dim();
    let qs: Vec<Query> = vectors
        .chunks_exact(d)
        .enumerate()
        .map(|(i, v)| Query { id: a.query_first_id + i as u64, vector: Some(v) })
        .collect();
    let candidates = run.time("stage1", || stage1(&index, &qs, k, nprobe));

    let (exact_rows, dim) = rows(&exact);
    let store = RowStore { rows: exact_rows, dim, first_id: a.exact_first_id };
    let (q_rows, _) = rows(&query_exact);
    let per_query = run.time("stage2", || {
        par::map_range(candidates.len(), |i| match &candidates[i] {
            Err(f) => Err(format!("query {}: {}", f.query_id, f.reason)),
            Ok(c) => match q_rows.get(i * dim..(i + 1) * dim) {
                None => Ok(c
                    .candidates
                    .iter()
                    .map(|n| DuplicateVerdict {
                        query_id: c.query_id,
                        neighbor_id: n.id,
                        distance: None,
                        flagged: false,
                        label: Default::default(),
                        note: Some("query exact descriptor missing".into()),
                    })
                    .collect()),
                Some(q) => stage2(q, c, &store, threshold).map_err(|e| e.to_string()),
            },
        })
    });
    let mut verdicts = Vec::new();
    let mut manifests = Vec::new();
    let mut failed = 0usize;
    for r in per_query {
        match r {
            Ok(v) => {
                if let Some(m) = review_manifest(&v, review) {
                    manifests.extend(m);
                }
                verdicts.extend(v);
            }
            Err(e) => {
                failed += 1;
                log::warn!("{e}");
            }
        }
    }
    run.write("--out", &a.out, |w| Ok(write_verdicts(w, &verdicts)?))?;
    if let Some(p) = &a.review {
        run.write("--review", p, |w| Ok(write_verdicts(w, &manifests)?))?;
    }
    let summary = summarize(&verdicts, qs.len());
    run.write_or_print("--summary", a.summary.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    run.detail("queries", qs.len());
    run.detail("failed_queries", failed);
    run.detail("flagged_pairs", summary.flagged_pairs);
    run.detail("flagged_queries", summary.flagged_queries);
    Ok(())
}
