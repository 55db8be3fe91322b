pub mod dedup;
pub mod descriptors;
pub mod index;
pub mod labels;
pub mod report;
pub mod sampling;
pub mod schedule;

use std::path::Path;

use anyhow::{bail, Context, Result};
use wildset_core::descriptor::{DType, DescriptorFile};
use wildset_core::ivf::QuantizerSet;

use crate::run::Run;

pub fn read_descriptors(run: &mut Run, role: &str, path: &Path, want: DType) -> Result<DescriptorFile> {
    let mut r = run.open(role, path)?;
    let file = DescriptorFile::read(&mut r).with_context(|| format!("{role}: {}", path.display()))?;
    if file.dtype() != want {
        bail!("{role}: {} holds {:?} descriptors, expected {want:?}", path.display(), file.dtype());
    }
    Ok(file)
}

pub fn read_quantizers(run: &mut Run, path: &Path) -> Result<QuantizerSet> {
    let mut r = run.open("--quantizers", path)?;
    QuantizerSet::read(&mut r).with_context(|| format!("--quantizers: {}", path.display()))
}
