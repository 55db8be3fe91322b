use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use rand::seq::index::sample;
use serde::Serialize;
use wildset_core::descriptor::{DType, DescriptorFile};
use wildset_core::ivf::{read_index, write_index, DuplicatePolicy, InvertedIndex, QuantizerSet};
use wildset_core::{par, seed};

use super::{read_descriptors, read_quantizers};
use crate::config::Duplicates;
use crate::run::Run;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Raw descriptors (f32 rows).
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rows sampled for training; all rows when unset.
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub coarse_bits: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn train(args: TrainArgs, run: &mut Run) -> Result<()> {
    let q = &mut run.config.quantizer;
    q.train_size = args.train_size.or(q.train_size);
    q.coarse_bits = args.coarse_bits.unwrap_or(q.coarse_bits);
    run.config.seed = args.seed.or(run.config.seed);
    run.config.validate()?;
    let file = read_descriptors(run, "--raw", &args.raw, DType::F32)?;
    let DescriptorFile::F32 { dim, rows } = file else { unreachable!("dtype checked") };
    let n = rows.len() / dim;
    let sample_seed = run.seed("train-quantizers/sample")?;
    let train_seed = run.seed("train-quantizers")?;
    let rows = match run.config.quantizer.train_size {
        Some(t) if t < n => {
            let mut picked = sample(&mut seed::rng(sample_seed), n, t).into_vec();
            picked.sort_unstable();
            picked.iter().flat_map(|&i| rows[i * dim..(i + 1) * dim].iter().copied()).collect()
        }
        _ => rows,
    };
    let cfg = run.config.quantizer.to_core(train_seed);
    let trained =
        run.time("train", || QuantizerSet::train(&rows, dim, &cfg)).context("--raw: quantizer training failed")?;
    run.write("--out", &args.out, |w| Ok(trained.set.write(w)?))?;
    run.detail("training_rows", rows.len() / dim);
    run.detail("opq_objective", trained.opq_objective.last().copied());
    run.detail("coarse_objective", trained.coarse_objective);
    run.detail("residual_objective", trained.residual_objective);
    run.detail("floored_components", trained.set.pca.floored_components());
    Ok(())
}

#[derive(Debug, Subcommand)]
pub enum IndexCmd {
    /// Index every row of a storage file; row `i` gets id `first_id + i`.
    Build {
        #[arg(long)]
        quantizers: PathBuf,
        #[arg(long)]
        storage: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        first_id: u64,
    },
    /// Append a storage file to an existing index.
    Add {
        #[arg(long)]
        quantizers: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        storage: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        first_id: u64,
    },
    /// Nearest neighbours of each query row, as JSON lines.
    Search {
        #[arg(long)]
        quantizers: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Id of the first query row, used only to label results.
        #[arg(long, default_value_t = 0)]
        first_id: u64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        nprobe: Option<usize>,
    },
}

impl IndexCmd {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Build { .. } => "index build",
            Self::Add { .. } => "index add",
            Self::Search { .. } => "index search",
        }
    }
}

/// Index-form vectors of every row of an 8-bit storage file.
pub fn index_vectors(set: &QuantizerSet, file: &DescriptorFile, role: &str) -> Result<Vec<f32>> {
    let DescriptorFile::U8 { quantizer, .. } = file else { bail!("{role}: expected 8-bit storage rows") };
    if quantizer != &set.scalar {
        bail!("{role}: encoded with a different scalar quantizer than --quantizers");
    }
    let rows = par::map_range(file.count(), |i| set.index_vector(&file.u8_row(i).expect("index below count")));
    Ok(rows.into_iter().collect::<wildset_core::Result<Vec<_>>>()?.concat())
}

fn load_index(run: &mut Run, set: &QuantizerSet, path: &Path) -> Result<InvertedIndex> {
    let mut r = run.open("--index", path)?;
    read_index(&mut r, &set.coarse, &set.residual).with_context(|| format!("--index: {}", path.display()))
}

fn add_rows(run: &mut Run, set: &QuantizerSet, index: &mut InvertedIndex, storage: &Path, first_id: u64) -> Result<()> {
    let file = read_descriptors(run, "--storage", storage, DType::U8)?;
    let vectors = run.time("encode", || index_vectors(set, &file, "--storage"))?;
    let n = file.count() as u64;
    let last = first_id.checked_add(n).context("--first-id: ids overflow u64")?;
    let ids: Vec<u64> = (first_id..last).collect();
    run.time("add", || index.add_batch(&ids, &vectors)).context("--storage")?;
    run.detail("added", n);
    Ok(())
}

#[derive(Serialize)]
struct SearchLine {
    query_id: u64,
    neighbors: Vec<NeighborOut>,
}

#[derive(Serialize)]
struct NeighborOut {
    id: u64,
    distance: f32,
}

pub fn run(cmd: IndexCmd, run: &mut Run) -> Result<()> {
    match cmd {
        IndexCmd::Build { quantizers, storage, out, first_id } => {
            let set = read_quantizers(run, &quantizers)?;
            let policy = match run.config.index.duplicates {
                Duplicates::Reject => DuplicatePolicy::Reject,
                Duplicates::Allow => DuplicatePolicy::Allow,
            };
            let mut index = set.new_index(policy)?;
            add_rows(run, &set, &mut index, &storage, first_id)?;
            run.write("--out", &out, |w| Ok(write_index(w, &index)?))?;
            run.detail("entries", index.len());
            run.detail("non_empty_cells", index.non_empty_cells());
        }
        IndexCmd::Add { quantizers, index, storage, out, first_id } => {
            let set = read_quantizers(run, &quantizers)?;
            let mut idx = load_index(run, &set, &index)?;
            add_rows(run, &set, &mut idx, &storage, first_id)?;
            run.write("--out", &out, |w| Ok(write_index(w, &idx)?))?;
            run.detail("entries", idx.len());
            run.detail("non_empty_cells", idx.non_empty_cells());
        }
        IndexCmd::Search { quantizers, index, queries, out, first_id, k, nprobe } => {
            let ic = &mut run.config.index;
            ic.k = k.unwrap_or(ic.k);
            ic.nprobe = nprobe.unwrap_or(ic.nprobe);
            run.config.validate()?;
            let (k, nprobe) = (run.config.index.k, run.config.index.nprobe);
            let set = read_quantizers(run, &quantizers)?;
            let idx = load_index(run, &set, &index)?;
            let file = read_descriptors(run, "--queries", &queries, DType::U8)?;
            let vectors = index_vectors(&set, &file, "--queries")?;
            let d = set.index_dim();
            let hits = run.time("search", || idx.search_batch(&vectors, k, nprobe)).context("--queries")?;
            run.write_or_print("--out", out.as_deref(), |w| {
                for (i, h) in hits.iter().enumerate() {
                    let line = SearchLine {
                        query_id: first_id + i as u64,
                        neighbors: h.iter().map(|n| NeighborOut { id: n.id, distance: n.distance }).collect(),
                    };
                    serde_json::to_writer(&mut *w, &line)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
            run.detail("queries", vectors.len() / d);
        }
    }
    Ok(())
}
