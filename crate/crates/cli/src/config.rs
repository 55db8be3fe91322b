//! The pipeline config file: one TOML tree of module parameters and a single
//! root seed. Command-line flags override individual fields.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wildset_core::dedup::{DEFAULT_CANDIDATES, DEFAULT_REVIEW, DEFAULT_THRESHOLD};
use wildset_core::descriptor::{EIG_FLOOR, TARGET_LONG_SIDE, WHITENED_DIM};
use wildset_core::ivf::{DEFAULT_NPROBE, QuantizerSetConfig};
use wildset_core::quantizer::OpqConfig;
use wildset_core::sampler::Mode;
use wildset_core::schedule::Interpolation;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every random stream. Commands that draw randomness refuse to
    /// run without one.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub descriptor: DescriptorConfig,
    pub quantizer: QuantizerConfig,
    pub index: IndexConfig,
    pub dedup: DedupConfig,
    pub hashtag: HashtagConfig,
    pub sampler: SamplerConfig,
    pub schedule: ScheduleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub scales: usize,
    pub long_side: u32,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { scales: 3, long_side: TARGET_LONG_SIDE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    /// Rows drawn (seeded, without replacement) for training; all when unset.
    pub train_size: Option<usize>,
    pub whitened_dim: usize,
    pub eig_floor: f64,
    pub opq_dim: usize,
    pub opq_m: usize,
    pub opq_bits: u32,
    pub opq_alternations: usize,
    pub opq_kmeans_iters: usize,
    pub opq_refine_iters: usize,
    pub coarse_bits: u32,
    pub coarse_iters: usize,
    pub residual_m: usize,
    pub residual_bits: u32,
    pub residual_iters: usize,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        let q = QuantizerSetConfig::default();
        let o = OpqConfig::default();
        Self {
            train_size: None,
            whitened_dim: WHITENED_DIM,
            eig_floor: EIG_FLOOR,
            opq_dim: o.d_out,
            opq_m: o.m,
            opq_bits: o.bits,
            opq_alternations: o.alternations,
            opq_kmeans_iters: o.kmeans_iters,
            opq_refine_iters: o.refine_iters,
            coarse_bits: q.coarse_bits,
            coarse_iters: q.coarse_iters,
            residual_m: q.residual_m,
            residual_bits: q.residual_bits,
            residual_iters: q.residual_iters,
        }
    }
}

impl QuantizerConfig {
    pub fn to_core(&self, seed: u64) -> QuantizerSetConfig {
        QuantizerSetConfig {
            whitened_dim: self.whitened_dim,
            eig_floor: self.eig_floor,
            opq: OpqConfig {
                d_out: self.opq_dim,
                m: self.opq_m,
                bits: self.opq_bits,
                alternations: self.opq_alternations,
                kmeans_iters: self.opq_kmeans_iters,
                refine_iters: self.opq_refine_iters,
                seed: 0,
            },
            coarse_bits: self.coarse_bits,
            coarse_iters: self.coarse_iters,
            residual_m: self.residual_m,
            residual_bits: self.residual_bits,
            residual_iters: self.residual_iters,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Duplicates {
    #[default]
    Reject,
    Allow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub k: usize,
    pub nprobe: usize,
    pub duplicates: Duplicates,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self { k: DEFAULT_CANDIDATES, nprobe: DEFAULT_NPROBE, duplicates: Duplicates::Reject }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub candidates: usize,
    pub threshold: f64,
    pub review: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self { candidates: DEFAULT_CANDIDATES, threshold: DEFAULT_THRESHOLD, review: DEFAULT_REVIEW }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashtagConfig {
    pub top_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: Mode,
    pub target_len: Option<u64>,
    /// Target length as a multiple of the corpus size.
    pub target_multiple: Option<f64>,
    /// Fixed replication threshold instead of a target length.
    pub threshold: Option<f64>,
    pub noise_p: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { mode: Mode::Sqrt, target_len: None, target_multiple: None, threshold: None, noise_p: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub minibatch: Option<u64>,
    pub warmup_images: Option<f64>,
    pub interpolation: Interpolation,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("--config: cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("--config: {}", path.display()))
    }

    /// Checks every field a command may use; messages start with the field.
    pub fn validate(&self) -> Result<()> {
        let d = &self.descriptor;
        if d.scales == 0 {
            bail!("descriptor.scales: must be at least 1");
        }
        if d.long_side == 0 {
            bail!("descriptor.long_side: must be at least 1");
        }
        let q = &self.quantizer;
        if q.train_size == Some(0) {
            bail!("quantizer.train_size: must be at least 1");
        }
        for (name, bits) in [("opq_bits", q.opq_bits), ("residual_bits", q.residual_bits)] {
            if !(1..=8).contains(&bits) {
                bail!("quantizer.{name}: must be between 1 and 8");
            }
        }
        if !(1..=16).contains(&q.coarse_bits) {
            bail!("quantizer.coarse_bits: must be between 1 and 16");
        }
        if q.residual_m == 0 || q.residual_m % 2 != 0 {
            bail!("quantizer.residual_m: must be a positive even number");
        }
        if q.opq_dim == 0 || q.opq_dim > q.whitened_dim {
            bail!("quantizer.opq_dim: must be between 1 and whitened_dim ({})", q.whitened_dim);
        }
        if q.opq_dim % 2 != 0 || q.opq_dim % q.residual_m != 0 {
            bail!("quantizer.opq_dim: must be even and divisible by residual_m ({})", q.residual_m);
        }
        if !(q.eig_floor > 0.0) {
            bail!("quantizer.eig_floor: must be positive");
        }
        if self.index.k == 0 {
            bail!("index.k: must be at least 1");
        }
        if self.index.nprobe == 0 {
            bail!("index.nprobe: must be at least 1");
        }
        let dd = &self.dedup;
        if dd.candidates == 0 {
            bail!("dedup.candidates: must be at least 1");
        }
        if !(dd.threshold.is_finite() && dd.threshold >= 0.0) {
            bail!("dedup.threshold: must be a non-negative number");
        }
        if dd.review == 0 {
            bail!("dedup.review: must be at least 1");
        }
        if self.hashtag.top_n == Some(0) {
            bail!("hashtag.top_n: must be at least 1");
        }
        let s = &self.sampler;
        if s.target_len.is_some() && s.target_multiple.is_some() {
            bail!("sampler.target_len: give either target_len or target_multiple, not both");
        }
        if let Some(m) = s.target_multiple {
            if !(m.is_finite() && m >= 1.0) {
                bail!("sampler.target_multiple: must be at least 1");
            }
        }
        if let Some(t) = s.threshold {
            if !(t.is_finite() && t > 0.0) {
                bail!("sampler.threshold: must be positive");
            }
        }
        if let Some(p) = s.noise_p {
            if !(0.0..=1.0).contains(&p) {
                bail!("sampler.noise_p: must be in [0, 1]");
            }
        }
        if self.schedule.minibatch == Some(0) {
            bail!("schedule.minibatch: must be at least 1");
        }
        if let Some(w) = self.schedule.warmup_images {
            if !(w.is_finite() && w >= 0.0) {
                bail!("schedule.warmup_images: must be non-negative");
            }
        }
        if self.threads == Some(0) {
            bail!("threads: must be at least 1");
        }
        Ok(())
    }
}
