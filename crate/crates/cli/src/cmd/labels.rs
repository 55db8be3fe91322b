use std::io::{BufRead, Read, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use wildset_core::hashtag::{
    canonical_merge, read_canonical_map, read_counts, select_vocab, write_canonical_map, write_counts, CanonicalMap,
    Relabeler, SynsetDb, SynsetSet,
};
use wildset_core::sampler::{make_target, read_records, write_records, ImageRecord, Vocabulary};

use crate::run::Run;

fn synsets(run: &mut Run, path: &PathBuf) -> Result<SynsetDb> {
    let mut text = String::new();
    run.open("--synsets", path)?.read_to_string(&mut text)?;
    SynsetDb::parse(&text).with_context(|| format!("--synsets: {}", path.display()))
}

fn counts(run: &mut Run, path: &PathBuf) -> Result<Vec<(String, u64)>> {
    let r = run.open("--counts", path)?;
    read_counts(r).with_context(|| format!("--counts: {}", path.display()))
}

fn records(run: &mut Run, path: &PathBuf) -> Result<Vec<ImageRecord>> {
    let r = run.open("--records", path)?;
    read_records(r).with_context(|| format!("--records: {}", path.display()))
}

#[derive(Debug, Args)]
pub struct CanonicalizeArgs {
    /// `tag TAB count` lines.
    #[arg(long)]
    counts: PathBuf,
    /// `term TAB synset[,synset...]` lines.
    #[arg(long)]
    synsets: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn canonicalize(a: CanonicalizeArgs, run: &mut Run) -> Result<()> {
    let corpus = counts(run, &a.counts)?;
    let db = synsets(run, &a.synsets)?;
    let cmap = run.time("merge", || canonical_merge(&corpus, &db));
    run.write("--out", &a.out, |w| Ok(write_canonical_map(w, &cmap)?))?;
    run.detail("tags", cmap.len());
    run.detail("groups", cmap.groups().len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    synsets: PathBuf,
    /// Synset ids to keep, one per line; every synset when not given.
    #[arg(long)]
    allowed: Option<PathBuf>,
    /// Canonical map from `canonicalize`; selection then ranks groups by
    /// their summed counts.
    #[arg(long)]
    canonical: Option<PathBuf>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Selected `tag TAB count` lines.
    #[arg(long)]
    out: PathBuf,
    /// Image records to relabel with the selected vocabulary.
    #[arg(long, requires = "relabeled")]
    records: Option<PathBuf>,
    /// Relabelled records; images left without tags are dropped.
    #[arg(long, requires = "records")]
    relabeled: Option<PathBuf>,
}

pub fn vocab(a: VocabArgs, run: &mut Run) -> Result<()> {
    run.config.hashtag.top_n = a.top_n.or(run.config.hashtag.top_n);
    run.config.validate()?;
    let raw = counts(run, &a.counts)?;
    let db = synsets(run, &a.synsets)?;
    let allowed: SynsetSet = match &a.allowed {
        Some(p) => {
            let mut set = SynsetSet::new();
            for line in run.open("--allowed", p)?.lines() {
                let line = line?;
                let id = line.trim();
                if !id.is_empty() && !id.starts_with('#') {
                    set.insert(id.to_string());
                }
            }
            if set.is_empty() {
                bail!("--allowed: {} lists no synset ids", p.display());
            }
            set
        }
        None => db.all_synsets(),
    };
    let cmap = match &a.canonical {
        Some(p) => {
            let r = run.open("--canonical", p)?;
            read_canonical_map(r).with_context(|| format!("--canonical: {}", p.display()))?
        }
        None => CanonicalMap::default(),
    };
    let ranked: Vec<(String, u64)> = if a.canonical.is_some() {
        cmap.groups().iter().map(|g| (g.canonical.clone(), g.count)).collect()
    } else {
        raw
    };
    let top_n = run.config.hashtag.top_n;
    let selected = run.time("select", || select_vocab(&allowed, &ranked, &db, top_n));
    run.write("--out", &a.out, |w| Ok(write_counts(w, &selected)?))?;
    run.detail("selected", selected.len());

    if let (Some(rin), Some(rout)) = (&a.records, &a.relabeled) {
        let recs = records(run, rin)?;
        let relabeler = Relabeler::new(&cmap, selected.iter().map(|s| s.0.as_str()));
        let out: Vec<ImageRecord> = recs
            .iter()
            .map(|r| ImageRecord { image_id: r.image_id, tags: relabeler.relabel(&r.tags) })
            .filter(|r| !r.tags.is_empty())
            .collect();
        run.write("--relabeled", rout, |w| Ok(write_records(w, &out)?))?;
        run.detail("records_in", recs.len());
        run.detail("records_kept", out.len());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TargetsArgs {
    #[arg(long)]
    records: PathBuf,
    /// Vocabulary as `tag TAB count` lines (from `vocab`); line order fixes
    /// the tag indices.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct TargetLine<'a> {
    image_id: u64,
    targets: Vec<(&'a str, f64)>,
}

pub fn targets(a: TargetsArgs, run: &mut Run) -> Result<()> {
    let recs = records(run, &a.records)?;
    let tags = {
        let r = run.open("--vocab", &a.vocab)?;
        read_counts(r).with_context(|| format!("--vocab: {}", a.vocab.display()))?
    };
    if tags.is_empty() {
        bail!("--vocab: {} is empty", a.vocab.display());
    }
    let vocab = Vocabulary::from_tags(tags.iter().map(|t| t.0.as_str()));
    let mut dropped = 0usize;
    let mut written = 0usize;
    run.write("--out", &a.out, |w| {
        for r in &recs {
            let Some(t) = make_target(&r.tags, &vocab) else {
                dropped += 1;
                continue;
            };
            let line =
                TargetLine { image_id: r.image_id, targets: t.entries.iter().map(|&(i, x)| (vocab.tag(i), x)).collect() };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
            written += 1;
        }
        Ok(())
    })?;
    run.detail("targets", written);
    run.detail("dropped_records", dropped);
    Ok(())
}
