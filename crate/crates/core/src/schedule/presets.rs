//! Published schedules, embedded from the `presets/` TOML files.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{interpolate_length, DecayPlan, Interpolation, ScheduleSpec, DEFAULT_WARMUP_IMAGES};

const PRETRAIN: &str = include_str!("../../presets/pretrain.toml");
const FINETUNE: &str = include_str!("../../presets/finetune.toml");
const DETECTION: &str = include_str!("../../presets/detection.toml");

/// A decay factor written either as a number or as `"sqrt(x)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Factor {
    Number(f64),
    Expr(String),
}

impl Factor {
    pub fn value(&self) -> Result<f64> {
        match self {
            Self::Number(x) => Ok(*x),
            Self::Expr(s) => s
                .strip_prefix("sqrt(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|x| x.trim().parse::<f64>().ok())
                .map(f64::sqrt)
                .ok_or_else(|| Error::format(format!("decay factor {s:?} is neither a number nor sqrt(x)"))),
        }
    }

    /// As written in the preset file.
    pub fn text(&self) -> String {
        match self {
            Self::Number(x) => super::format_value(*x),
            Self::Expr(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainPreset {
    pub name: String,
    pub dataset: String,
    pub dataset_images: u64,
    /// ImageNet rows: length and plateau lengths in epochs.
    pub total_epochs: Option<f64>,
    pub steps: Option<Vec<f64>>,
    /// Instagram rows: images processed and number of equal decays.
    pub total_images: Option<f64>,
    pub lr_steps: Option<u32>,
    pub base_lr: f64,
    pub reference_batch: u64,
    pub minibatch: u64,
    pub lr_decay: Factor,
    pub weight_decay: f64,
}

impl PretrainPreset {
    pub fn total_images(&self) -> f64 {
        self.total_images
            .unwrap_or_else(|| self.total_epochs.unwrap_or(0.0) * self.dataset_images as f64)
    }

    pub fn decay_plan(&self) -> Result<DecayPlan> {
        let factor = self.lr_decay.value()?;
        match (&self.steps, self.lr_steps) {
            (Some(epochs), None) => {
                Ok(DecayPlan::Segments { epochs: epochs.clone(), epoch_images: self.dataset_images as f64, factor })
            }
            (None, Some(decays)) => Ok(DecayPlan::EqualSteps { decays, factor }),
            _ => Err(Error::format(format!("preset {} needs exactly one of steps or lr_steps", self.name))),
        }
    }

    /// The schedule at `minibatch` (the preset's own when `None`).
    pub fn spec(&self, minibatch: Option<u64>, warmup_images: Option<f64>) -> Result<ScheduleSpec> {
        let spec = ScheduleSpec {
            total_images: self.total_images(),
            warmup_images: warmup_images.unwrap_or(DEFAULT_WARMUP_IMAGES),
            base_lr: self.base_lr,
            reference_batch: self.reference_batch,
            minibatch: minibatch.unwrap_or(self.minibatch),
            decay: self.decay_plan()?,
            weight_decay: self.weight_decay,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFamily {
    pub name: String,
    pub small: String,
    pub large: String,
}

impl ScheduleFamily {
    /// Schedule for a dataset of `dataset_images`: length interpolated
    /// between the endpoints, decays taken from the endpoint nearer in log
    /// dataset size (ties to the smaller).
    pub fn spec(
        &self,
        dataset_images: f64,
        minibatch: Option<u64>,
        warmup_images: Option<f64>,
        how: Interpolation,
    ) -> Result<ScheduleSpec> {
        let small = pretrain_preset(&self.small)?;
        let large = pretrain_preset(&self.large)?;
        let (s, l) = (small.dataset_images as f64, large.dataset_images as f64);
        let total =
            interpolate_length(dataset_images, (s, small.total_images()), (l, large.total_images()), how)?;
        let n = dataset_images.clamp(s, l);
        let nearer = if (l.ln() - n.ln()) < (n.ln() - s.ln()) { large } else { small };
        let mut spec = nearer.spec(minibatch, warmup_images)?;
        spec.total_images = total;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
struct PretrainFile {
    schedule: Vec<PretrainPreset>,
    family: Vec<ScheduleFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetunePreset {
    pub source: String,
    pub target: String,
    pub total_epochs: f64,
    pub steps: Vec<f64>,
    pub base_lr: f64,
    pub reference_batch: u64,
    pub lr_decay: Factor,
    pub weight_decay: f64,
}

#[derive(Debug, Deserialize)]
struct FinetuneFile {
    schedule: Vec<FinetunePreset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLr {
    pub backbone: String,
    pub source: String,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPresets {
    pub minibatch: u64,
    pub iterations: u64,
    pub decay_iterations: Vec<u64>,
    pub lr_decay: f64,
    pub initial_lr: Vec<DetectionLr>,
}

fn pretrain_file() -> &'static PretrainFile {
    static FILE: OnceLock<PretrainFile> = OnceLock::new();
    FILE.get_or_init(|| toml::from_str(PRETRAIN).expect("embedded pretraining presets parse"))
}

pub fn pretrain_presets() -> &'static [PretrainPreset] {
    &pretrain_file().schedule
}

pub fn pretrain_preset(name: &str) -> Result<&'static PretrainPreset> {
    let key = name.to_ascii_lowercase();
    pretrain_presets().iter().find(|p| p.name == key || p.dataset.eq_ignore_ascii_case(name)).ok_or_else(|| {
        let names: Vec<&str> = pretrain_presets().iter().map(|p| p.name.as_str()).collect();
        Error::invalid(format!("preset: unknown schedule {name:?} (known: {})", names.join(", ")))
    })
}

pub fn family(name: &str) -> Result<&'static ScheduleFamily> {
    let key = name.to_ascii_lowercase();
    pretrain_file().family.iter().find(|f| f.name == key).ok_or_else(|| {
        let names: Vec<&str> = pretrain_file().family.iter().map(|f| f.name.as_str()).collect();
        Error::invalid(format!("preset: unknown schedule family {name:?} (known: {})", names.join(", ")))
    })
}

/// Dataset names match case-insensitively, with or without `train-`.
fn same_dataset(a: &str, b: &str) -> bool {
    let strip = |s: &str| {
        let l = s.trim().to_ascii_lowercase();
        l.strip_prefix("train-").map(str::to_string).unwrap_or(l)
    };
    strip(a) == strip(b)
}

pub fn finetune_presets() -> &'static [FinetunePreset] {
    static FILE: OnceLock<FinetuneFile> = OnceLock::new();
    &FILE.get_or_init(|| toml::from_str(FINETUNE).expect("embedded finetuning presets parse")).schedule
}

pub fn finetune_preset(source: &str, target: &str) -> Result<&'static FinetunePreset> {
    finetune_presets()
        .iter()
        .find(|p| same_dataset(&p.source, source) && same_dataset(&p.target, target))
        .ok_or_else(|| Error::invalid(format!("no finetuning schedule from {source} to {target}")))
}

pub fn detection_presets() -> &'static DetectionPresets {
    static FILE: OnceLock<DetectionPresets> = OnceLock::new();
    FILE.get_or_init(|| toml::from_str(DETECTION).expect("embedded detection presets parse"))
}

pub fn detection_lr(backbone: &str, source: &str) -> Result<f64> {
    detection_presets()
        .initial_lr
        .iter()
        .find(|d| d.backbone.eq_ignore_ascii_case(backbone.trim()) && same_dataset(&d.source, source))
        .map(|d| d.lr)
        .ok_or_else(|| Error::invalid(format!("no detection learning rate for {backbone} from {source}")))
}
