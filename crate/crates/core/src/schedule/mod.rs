//! Learning-rate schedules: linear scaling with warm-up, then step decays,
//! either equally spaced or at explicit epoch boundaries.

mod presets;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use presets::{
    detection_lr, detection_presets, family, finetune_preset, finetune_presets, pretrain_preset, pretrain_presets,
    DetectionLr, DetectionPresets, Factor, FinetunePreset, PretrainPreset, ScheduleFamily,
};

/// Images in one epoch of the reference ImageNet-1k training set; warm-up
/// lengths are expressed in these units.
pub const REFERENCE_EPOCH_IMAGES: f64 = 1_281_167.0;
/// Default warm-up: five reference epochs.
pub const DEFAULT_WARMUP_IMAGES: f64 = 5.0 * REFERENCE_EPOCH_IMAGES;

/// `base / reference × minibatch`.
pub fn scaled_lr(base: f64, reference: u64, minibatch: u64) -> Result<f64> {
    if reference == 0 || minibatch == 0 {
        return Err(Error::invalid("minibatch and reference batch must be at least 1"));
    }
    Ok(base * minibatch as f64 / reference as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayPlan {
    /// `decays` multiplications by `factor`, splitting the post-warm-up span
    /// into `decays + 1` equal plateaus.
    EqualSteps { decays: u32, factor: f64 },
    /// Plateau lengths in epochs of `epoch_images`; a decay at every boundary
    /// between consecutive segments. The last segment extends to the end.
    Segments { epochs: Vec<f64>, epoch_images: f64, factor: f64 },
}

impl DecayPlan {
    pub fn factor(&self) -> f64 {
        match self {
            Self::EqualSteps { factor, .. } | Self::Segments { factor, .. } => *factor,
        }
    }

    pub fn decays(&self) -> u32 {
        match self {
            Self::EqualSteps { decays, .. } => *decays,
            Self::Segments { epochs, .. } => epochs.len().saturating_sub(1) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleSpec {
    pub total_images: f64,
    pub warmup_images: f64,
    /// Learning rate at the reference batch size; also the warm-up start.
    pub base_lr: f64,
    pub reference_batch: u64,
    pub minibatch: u64,
    pub decay: DecayPlan,
    /// Carried as metadata.
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    pub start_images: f64,
    pub end_images: f64,
    pub lr: f64,
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        let named = |field: &str, msg: &str| Err(Error::invalid(format!("{field}: {msg}")));
        if !(self.total_images > 0.0 && self.total_images.is_finite()) {
            return named("total_images", "must be positive");
        }
        if !(0.0..=self.total_images).contains(&self.warmup_images) {
            return named("warmup_images", "must be within [0, total_images]");
        }
        if !(self.base_lr > 0.0) {
            return named("base_lr", "must be positive");
        }
        if self.minibatch == 0 || self.reference_batch == 0 {
            return named("minibatch", "must be at least 1");
        }
        let f = self.decay.factor();
        if !(f > 0.0 && f <= 1.0) {
            return named("lr_decay", "must be in (0, 1]");
        }
        if let DecayPlan::Segments { epochs, epoch_images, .. } = &self.decay {
            if epochs.is_empty() || epochs.iter().any(|&e| !(e > 0.0)) || !(*epoch_images > 0.0) {
                return named("steps", "segments and epoch size must be positive");
            }
            let total_epochs = self.total_images / epoch_images;
            if epochs.iter().sum::<f64>() > total_epochs * (1.0 + 1e-12) {
                return named("steps", "segments exceed the total length");
            }
        }
        Ok(())
    }

    pub fn peak_lr(&self) -> f64 {
        self.base_lr * self.minibatch as f64 / self.reference_batch as f64
    }

    /// Number of decays applied by the time `images_seen` images were
    /// processed (0 during warm-up).
    fn decays_at(&self, x: f64) -> u32 {
        match &self.decay {
            DecayPlan::EqualSteps { decays, .. } => {
                let span = self.total_images - self.warmup_images;
                if span <= 0.0 || x < self.warmup_images {
                    return 0;
                }
                let seg = ((x - self.warmup_images) * f64::from(decays + 1) / span).floor();
                (seg as u32).min(*decays)
            }
            DecayPlan::Segments { epochs, epoch_images, .. } => {
                let mut boundary = 0.0;
                let mut n = 0;
                for e in &epochs[..epochs.len() - 1] {
                    boundary += e * epoch_images;
                    if x >= boundary {
                        n += 1;
                    }
                }
                n
            }
        }
    }

    pub fn lr_at(&self, images_seen: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=self.total_images).contains(&images_seen) {
            return Err(Error::invalid(format!(
                "images_seen {images_seen} is outside [0, {}]",
                self.total_images
            )));
        }
        let peak = self.peak_lr();
        if images_seen < self.warmup_images {
            return Ok(self.base_lr + (peak - self.base_lr) * images_seen / self.warmup_images);
        }
        Ok(peak * self.decay.factor().powi(self.decays_at(images_seen) as i32))
    }

    /// Constant-LR spans after warm-up, in order.
    pub fn plateaus(&self) -> Result<Vec<Plateau>> {
        self.validate()?;
        let mut cuts = vec![self.warmup_images];
        match &self.decay {
            DecayPlan::EqualSteps { decays, .. } => {
                let span = self.total_images - self.warmup_images;
                cuts.extend((1..=*decays).map(|i| self.warmup_images + span * f64::from(i) / f64::from(decays + 1)));
            }
            DecayPlan::Segments { epochs, epoch_images, .. } => {
                let mut b = 0.0;
                for e in &epochs[..epochs.len() - 1] {
                    b += e * epoch_images;
                    if b > self.warmup_images {
                        cuts.push(b);
                    }
                }
            }
        }
        cuts.push(self.total_images);
        let mut out = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                out.push(Plateau { start_images: w[0], end_images: w[1], lr: self.lr_at(w[0])? });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Linear in the logarithm of the dataset size.
    Log,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            _ => Err(Error::invalid(format!("unknown interpolation {s:?} (linear, log)"))),
        }
    }
}

/// Schedule length for a dataset of `n` images, interpolated between two
/// `(dataset_size, images_processed)` endpoints. Sizes outside the endpoint
/// range are clamped with a warning.
pub fn interpolate_length(n: f64, small: (f64, f64), large: (f64, f64), how: Interpolation) -> Result<f64> {
    if !(small.0 > 0.0 && large.0 >= small.0 && n > 0.0) {
        return Err(Error::invalid("endpoints must be ordered by positive dataset size"));
    }
    if large.0 == small.0 {
        return Ok(small.1);
    }
    let clamped = n.clamp(small.0, large.0);
    if clamped != n {
        log::warn!("dataset size {n} is outside [{}, {}]; clamping", small.0, large.0);
    }
    if clamped == small.0 {
        return Ok(small.1);
    }
    if clamped == large.0 {
        return Ok(large.1);
    }
    let w = match how {
        Interpolation::Linear => (clamped - small.0) / (large.0 - small.0),
        Interpolation::Log => (clamped.ln() - small.0.ln()) / (large.0.ln() - small.0.ln()),
    };
    Ok(small.1 + w * (large.1 - small.1))
}

/// Shortest decimal form for round-ish values, scientific notation below
/// 1e-3 (`1.2`, `3.15`, `9.536743e-7`).
pub fn format_value(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        let s = format!("{x:.6e}");
        let (m, e) = s.split_once('e').expect("scientific format");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        return format!("{m}e{e}");
    }
    let s = format!("{x:.10}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
