use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use wildset_core::sampler::{
    build_epoch_list, epoch_tag_totals, inject_noise, read_records, select_threshold, write_epoch, write_records,
    Corpus, ImageRecord, Mode, ReplicationPlan,
};

use crate::run::Run;

fn load_corpus(run: &mut Run, path: &PathBuf) -> Result<Corpus> {
    let recs = {
        let r = run.open("--records", path)?;
        read_records(r).with_context(|| format!("--records: {}", path.display()))?
    };
    if recs.is_empty() {
        bail!("--records: empty input, {} holds no image records", path.display());
    }
    Corpus::from_records(&recs).with_context(|| format!("--records: {}", path.display()))
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    /// Image records as JSON lines `{image_id, tags}`.
    #[arg(long)]
    records: PathBuf,
    /// natural, uniform or sqrt.
    #[arg(long)]
    mode: Option<Mode>,
    /// Entries in the epoch list.
    #[arg(long, conflicts_with = "target_multiple")]
    target_len: Option<u64>,
    /// Epoch length as a multiple of the number of images.
    #[arg(long)]
    target_multiple: Option<f64>,
    /// Fixed replication threshold; used when no target is given.
    #[arg(long)]
    threshold: Option<f64>,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Image-id stream of the epoch list.
    #[arg(long)]
    ids: PathBuf,
    /// Per-copy tag masks, parallel to --ids.
    #[arg(long)]
    masks: PathBuf,
    /// Per-tag `tag TAB images TAB factor TAB epoch_total` lines.
    #[arg(long)]
    tag_totals: Option<PathBuf>,
}

pub fn resample(a: ResampleArgs, run: &mut Run) -> Result<()> {
    let s = &mut run.config.sampler;
    s.mode = a.mode.unwrap_or(s.mode);
    if a.target_len.is_some() || a.target_multiple.is_some() {
        s.target_len = a.target_len;
        s.target_multiple = a.target_multiple;
    }
    s.threshold = a.threshold.or(s.threshold);
    run.config.seed = a.seed.or(run.config.seed);
    run.config.validate()?;
    let seed = run.seed("resample")?;
    let corpus = load_corpus(run, &a.records)?;
    let freqs = corpus.frequencies();
    let n = corpus.len() as u64;
    let s = run.config.sampler.clone();
    let target = s.target_len.or(s.target_multiple.map(|m| (m * n as f64).round() as u64));
    let threshold = match (target, s.threshold, s.mode) {
        (Some(t), _, mode) => run
            .time("threshold", || select_threshold(&corpus, &freqs, t, mode, seed))
            .context("sampler.target_len")?,
        (None, Some(t), _) => t,
        (None, None, Mode::Natural) => 1.0,
        (None, None, _) => bail!("sampler.target_len: give --target-len, --target-multiple or --threshold"),
    };
    let plan = ReplicationPlan::new(&corpus, &freqs, s.mode, threshold)?;
    let list = run.time("materialise", || build_epoch_list(&corpus, &plan, seed))?;
    let (ids, masks) = (a.ids.clone(), a.masks.clone());
    let mut mask_bytes = Vec::new();
    run.write("--ids", &ids, |w| Ok(write_epoch(w, &mut mask_bytes, &list, &corpus)?))?;
    run.write("--masks", &masks, |w| Ok(w.write_all(&mask_bytes)?))?;
    if let Some(p) = &a.tag_totals {
        let totals = epoch_tag_totals(&list, corpus.vocab().len());
        run.write("--tag-totals", p, |w| {
            for (t, tag) in corpus.vocab().tags().iter().enumerate() {
                writeln!(w, "{tag}\t{}\t{}\t{}", freqs.count(t as u32), plan.tag_factors[t], totals[t])?;
            }
            Ok(())
        })?;
    }
    run.detail("mode", s.mode);
    run.detail("images", n);
    run.detail("target_len", target);
    run.detail("threshold", threshold);
    run.detail("epoch_len", list.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    records: PathBuf,
    /// Fraction of tag occurrences to replace.
    #[arg(long)]
    p: Option<f64>,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn noise(a: NoiseArgs, run: &mut Run) -> Result<()> {
    run.config.sampler.noise_p = a.p.or(run.config.sampler.noise_p);
    run.config.seed = a.seed.or(run.config.seed);
    run.config.validate()?;
    let p = run.config.sampler.noise_p.context("sampler.noise_p: give --p or set it in the config")?;
    let seed = run.seed("noise")?;
    let corpus = load_corpus(run, &a.records)?;
    let freqs = corpus.frequencies();
    let outcome = run.time("inject", || inject_noise(corpus.all_tags(), p, &freqs, seed)).context("--records")?;
    let vocab = corpus.vocab();
    let out: Vec<ImageRecord> = outcome
        .records
        .iter()
        .enumerate()
        .map(|(i, tags)| ImageRecord {
            image_id: corpus.id(i),
            tags: tags.iter().map(|&t| vocab.tag(t).to_string()).collect(),
        })
        .collect();
    run.write("--out", &a.out, |w| Ok(write_records(w, &out)?))?;
    run.detail("p", p);
    run.detail("occurrences", freqs.total_occurrences());
    run.detail("replaced", outcome.replaced.len());
    Ok(())
}
