use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use wildset_core::descriptor::{resize_plan, rmac_pool, DType, DescriptorFile};
use wildset_core::par;

use super::{read_descriptors, read_quantizers};
use crate::run::Run;

#[derive(Debug, Subcommand)]
pub enum DescriptorsCmd {
    /// R-MAC pool a feature-map file into raw descriptors (one row per map).
    Pool {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Region grid scales.
        #[arg(long)]
        scales: Option<usize>,
    },
    /// Whiten and 8-bit quantize raw descriptors for storage.
    Encode {
        #[arg(long)]
        quantizers: PathBuf,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the size an image is resized to before feature extraction.
    Resize {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long)]
        long_side: Option<u32>,
    },
}

impl DescriptorsCmd {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pool { .. } => "descriptors pool",
            Self::Encode { .. } => "descriptors encode",
            Self::Resize { .. } => "descriptors resize",
        }
    }
}

pub fn run(cmd: DescriptorsCmd, run: &mut Run) -> Result<()> {
    match cmd {
        DescriptorsCmd::Pool { maps, out, scales } => {
            if let Some(s) = scales {
                run.config.descriptor.scales = s;
            }
            run.config.validate()?;
            let scales = run.config.descriptor.scales;
            let file = read_descriptors(run, "--maps", &maps, DType::FeatureMapF32)?;
            let n = file.count();
            let pooled = run.time("pool", || {
                par::map_range(n, |i| {
                    let map = file.map(i).expect("index below count")?;
                    rmac_pool(&map, scales)
                })
            });
            let mut rows = Vec::with_capacity(n * file.dim());
            for (i, p) in pooled.into_iter().enumerate() {
                rows.extend(p.with_context(|| format!("--maps: feature map {i}"))?);
            }
            let out_file = DescriptorFile::f32_rows(file.dim(), rows)?;
            run.write("--out", &out, |w| Ok(out_file.write(w)?))?;
            run.detail("descriptors", n);
        }
        DescriptorsCmd::Encode { quantizers, raw, out } => {
            let set = read_quantizers(run, &quantizers)?;
            let file = read_descriptors(run, "--raw", &raw, DType::F32)?;
            if file.dim() != set.raw_dim() {
                bail!("--raw: rows have {} dimensions, the quantizers expect {}", file.dim(), set.raw_dim());
            }
            let n = file.count();
            let encoded = run.time("encode", || {
                par::map_range(n, |i| set.encode_storage(file.f32_row(i).expect("index below count")))
            });
            let mut codes = Vec::with_capacity(n);
            let mut clamped = 0usize;
            for (i, e) in encoded.into_iter().enumerate() {
                let (q, c) = e.with_context(|| format!("--raw: row {i}"))?;
                clamped += c;
                codes.push(q);
            }
            if clamped > 0 {
                log::warn!("{clamped} values fell outside the trained range and were clamped");
            }
            let out_file = DescriptorFile::u8_rows(set.scalar.clone(), &codes)?;
            run.write("--out", &out, |w| Ok(out_file.write(w)?))?;
            run.detail("descriptors", n);
            run.detail("clamped_values", clamped);
        }
        DescriptorsCmd::Resize { width, height, long_side } => {
            if let Some(l) = long_side {
                run.config.descriptor.long_side = l;
            }
            run.config.validate()?;
            let (w, h) = resize_plan(width, height, run.config.descriptor.long_side)
                .with_context(|| format!("--width/--height: {width}x{height}"))?;
            println!("{w} {h}");
        }
    }
    Ok(())
}
