use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use wildset_core::schedule::{
    detection_lr, detection_presets, family, finetune_preset, format_value, pretrain_preset, pretrain_presets,
    DecayPlan, Interpolation, Plateau, ScheduleSpec,
};

use crate::run::Run;

/// Family used when `--preset ig` is given without `--family`.
const DEFAULT_IG_FAMILY: &str = "ig-1.5k";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// A pretraining row (in1k, in5k, in9k, ig-940m-1.5k, ...) or `ig` for
    /// an interpolated Instagram schedule.
    #[arg(long, conflicts_with_all = ["finetune", "detection", "list"])]
    preset: Option<String>,
    /// Instagram schedule family to interpolate (ig-1.5k, ig-17k).
    #[arg(long)]
    family: Option<String>,
    /// Dataset size for an interpolated schedule.
    #[arg(long)]
    dataset_size: Option<f64>,
    #[arg(long)]
    minibatch: Option<u64>,
    #[arg(long)]
    warmup_images: Option<f64>,
    /// linear or log.
    #[arg(long)]
    interpolation: Option<Interpolation>,
    /// Fine-tuning schedule `SOURCE:TARGET`, e.g. `IG-940M-1.5k:IN-1k`.
    #[arg(long, conflicts_with_all = ["detection", "list"])]
    finetune: Option<String>,
    /// Detection learning rate `BACKBONE:SOURCE`, e.g. `ResNeXt-101 32x16d:IG-3.5B-17k`.
    #[arg(long, conflicts_with = "list")]
    detection: Option<String>,
    /// List the shipped pretraining presets.
    #[arg(long)]
    list: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Dump<'a> {
    name: &'a str,
    dataset: &'a str,
    minibatch: u64,
    base_lr: f64,
    peak_lr: f64,
    warmup_images: f64,
    total_images: f64,
    decay: &'a DecayPlan,
    weight_decay: f64,
    plateaus: Vec<Plateau>,
}

fn split_pair<'a>(flag: &str, s: &'a str) -> Result<(&'a str, &'a str)> {
    s.split_once(':').with_context(|| format!("{flag}: expected A:B, got {s:?}"))
}

fn steps_text(decay: &DecayPlan) -> String {
    match decay {
        DecayPlan::Segments { epochs, factor, .. } => {
            let e: Vec<String> = epochs.iter().map(|&x| format_value(x)).collect();
            format!("[{}] epochs, factor {}", e.join(","), format_value(*factor))
        }
        DecayPlan::EqualSteps { decays, factor } => {
            format!("{decays} equally spaced, factor {}", format_value(*factor))
        }
    }
}

fn write_table(w: &mut dyn Write, d: &Dump) -> Result<()> {
    writeln!(w, "schedule      {} ({})", d.name, d.dataset)?;
    writeln!(w, "minibatch     {}", d.minibatch)?;
    writeln!(w, "peak lr       {}", format_value(d.peak_lr))?;
    writeln!(w, "warm-up       {} images from lr {}", format_value(d.warmup_images.round()), format_value(d.base_lr))?;
    writeln!(w, "total         {} images", format_value(d.total_images.round()))?;
    writeln!(w, "steps         {}", steps_text(d.decay))?;
    writeln!(w, "weight decay  {}", format_value(d.weight_decay))?;
    writeln!(w, "{:>16} {:>16} {:>14}", "start_images", "end_images", "lr")?;
    for p in &d.plateaus {
        writeln!(
            w,
            "{:>16} {:>16} {:>14}",
            format_value(p.start_images.round()),
            format_value(p.end_images.round()),
            format_value(p.lr)
        )?;
    }
    Ok(())
}

pub fn run(a: ScheduleArgs, run: &mut Run) -> Result<()> {
    let sc = &mut run.config.schedule;
    sc.minibatch = a.minibatch.or(sc.minibatch);
    sc.warmup_images = a.warmup_images.or(sc.warmup_images);
    sc.interpolation = a.interpolation.unwrap_or(sc.interpolation);
    run.config.validate()?;
    let sc = run.config.schedule.clone();
    let json = a.format == Format::Json;

    if a.list {
        return run.write_or_print("--out", a.out.as_deref(), |w| {
            if json {
                serde_json::to_writer_pretty(&mut *w, pretrain_presets())?;
                writeln!(w)?;
            } else {
                for p in pretrain_presets() {
                    writeln!(w, "{:<14} {}", p.name, p.dataset)?;
                }
            }
            Ok(())
        });
    }
    if let Some(pair) = &a.finetune {
        let (src, tgt) = split_pair("--finetune", pair)?;
        let p = finetune_preset(src, tgt).context("--finetune")?;
        return run.write_or_print("--out", a.out.as_deref(), |w| {
            if json {
                serde_json::to_writer_pretty(&mut *w, p)?;
                writeln!(w)?;
            } else {
                let e: Vec<String> = p.steps.iter().map(|&x| format_value(x)).collect();
                writeln!(w, "finetune      {} -> {}", p.source, p.target)?;
                writeln!(w, "epochs        {}", format_value(p.total_epochs))?;
                writeln!(w, "steps         [{}]", e.join(","))?;
                writeln!(w, "lr            {} per {}", format_value(p.base_lr), p.reference_batch)?;
                writeln!(w, "lr decay      {}", p.lr_decay.text())?;
                writeln!(w, "weight decay  {}", format_value(p.weight_decay))?;
            }
            Ok(())
        });
    }
    if let Some(pair) = &a.detection {
        let (backbone, src) = split_pair("--detection", pair)?;
        let lr = detection_lr(backbone, src).context("--detection")?;
        let d = detection_presets();
        return run.write_or_print("--out", a.out.as_deref(), |w| {
            if json {
                serde_json::to_writer_pretty(
                    &mut *w,
                    &serde_json::json!({
                        "backbone": backbone, "source": src, "lr": lr,
                        "minibatch": d.minibatch, "iterations": d.iterations,
                        "decay_iterations": d.decay_iterations, "lr_decay": d.lr_decay,
                    }),
                )?;
                writeln!(w)?;
            } else {
                writeln!(w, "detection     {backbone} from {src}")?;
                writeln!(w, "lr            {}", format_value(lr))?;
                writeln!(w, "minibatch     {}", d.minibatch)?;
                writeln!(w, "iterations    {}", d.iterations)?;
                writeln!(w, "decays at     {:?}, factor {}", d.decay_iterations, format_value(d.lr_decay))?;
            }
            Ok(())
        });
    }

    let Some(preset) = a.preset.as_deref() else { bail!("--preset: required (or --finetune, --detection, --list)") };
    let (name, dataset, spec): (String, String, ScheduleSpec) = if preset.eq_ignore_ascii_case("ig") || a.family.is_some()
    {
        let fam = family(a.family.as_deref().unwrap_or(DEFAULT_IG_FAMILY)).context("--family")?;
        let n = a.dataset_size.context("--dataset-size: required for an interpolated schedule")?;
        if !(n > 0.0 && n.is_finite()) {
            bail!("--dataset-size: must be positive");
        }
        let spec = fam.spec(n, sc.minibatch, sc.warmup_images, sc.interpolation).context("--dataset-size")?;
        (fam.name.clone(), format!("{} images", format_value(n)), spec)
    } else {
        if a.dataset_size.is_some() {
            bail!("--dataset-size: only applies to interpolated schedules (--preset ig or --family)");
        }
        let p = pretrain_preset(preset)?;
        (p.name.clone(), p.dataset.clone(), p.spec(sc.minibatch, sc.warmup_images)?)
    };
    let dump = Dump {
        name: &name,
        dataset: &dataset,
        minibatch: spec.minibatch,
        base_lr: spec.base_lr,
        peak_lr: spec.peak_lr(),
        warmup_images: spec.warmup_images,
        total_images: spec.total_images,
        decay: &spec.decay,
        weight_decay: spec.weight_decay,
        plateaus: spec.plateaus()?,
    };
    run.write_or_print("--out", a.out.as_deref(), |w| {
        if json {
            serde_json::to_writer_pretty(&mut *w, &dump)?;
            writeln!(w)?;
            Ok(())
        } else {
            write_table(w, &dump)
        }
    })?;
    run.detail("peak_lr", dump.peak_lr);
    run.detail("plateaus", dump.plateaus.len());
    Ok(())
}
