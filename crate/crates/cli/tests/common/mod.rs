//! Small end-to-end inputs and a driver that runs every subcommand on them.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use wildset_core::descriptor::{DescriptorFile, FeatureMap};
use wildset_core::sampler::{write_records, ImageRecord};
use wildset_core::seed;

pub const CHANNELS: usize = 64;
pub const BASE_IMAGES: usize = 240;
pub const COPIES: usize = 60;
pub const IMAGES: usize = BASE_IMAGES + COPIES;
pub const RECORDS: usize = 2000;

pub const CONFIG: &str = r#"seed = 20180502

[quantizer]
whitened_dim = 32
opq_dim = 16
opq_m = 4
opq_bits = 4
opq_alternations = 4
coarse_bits = 3
residual_m = 4
residual_bits = 4

[index]
nprobe = 64

[dedup]
candidates = 16
"#;

const SYNSETS: &str = "brown bear\tn02132136\nursus arctos\tn02132136\ncat\tn02121620\nkitty\tn02121620\n\
dog\tn02084071\nsunset\tn11508382\nbeach\tn09217230\nmountain\tn09359803\nsnow\tn15043763\n";

const TAGS: [&str; 12] = [
    "cat", "love", "dog", "sunset", "brownbear", "beach", "instagood", "ursusarctos", "kitty", "mountain", "tbt",
    "snow",
];

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wildset")
}

/// Runs the binary in `dir` with `args`.
pub fn wildset(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).env_remove("WILDSET_THREADS").output().expect("binary runs")
}

/// Like [`wildset`] but panics with stderr on failure.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = wildset(dir, args);
    assert!(
        out.status.success(),
        "wildset {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn feature_maps() -> Vec<FeatureMap> {
    let mut rng = seed::rng(11);
    let (h, w) = (7, 7);
    let base: Vec<Vec<f32>> = (0..BASE_IMAGES)
        .map(|_| {
            (0..CHANNELS * h * w)
                .map(|_| if rng.random::<f32>() < 0.15 { rng.random::<f32>() * 4.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let copies: Vec<Vec<f32>> = base[..COPIES]
        .iter()
        .map(|v| v.iter().map(|&x| (x + rng.random_range(-0.05f32..0.05)).max(0.0)).collect())
        .collect();
    base.into_iter().chain(copies).map(|v| FeatureMap::new(CHANNELS, h, w, v).unwrap()).collect()
}

fn records() -> Vec<ImageRecord> {
    let mut rng = seed::rng(12);
    let weights: Vec<f64> = (1..=TAGS.len()).map(|k| 1.0 / k as f64).collect();
    let total: f64 = weights.iter().sum();
    (0..RECORDS as u64)
        .map(|id| {
            let n = rng.random_range(1..=3);
            let mut tags: Vec<String> = Vec::new();
            for _ in 0..n {
                let mut x = rng.random::<f64>() * total;
                let mut k = 0;
                while x > weights[k] && k + 1 < TAGS.len() {
                    x -= weights[k];
                    k += 1;
                }
                let t = format!("#{}", TAGS[k]);
                if !tags.contains(&t) {
                    tags.push(t);
                }
            }
            ImageRecord { image_id: 1000 + id, tags }
        })
        .collect()
}

/// Writes config, feature maps, tag counts, synsets and records into `dir`.
pub fn write_inputs(dir: &Path) {
    fs::write(dir.join("config.toml"), CONFIG).unwrap();
    fs::write(dir.join("synsets.tsv"), SYNSETS).unwrap();
    let maps = DescriptorFile::feature_maps(&feature_maps()).unwrap();
    maps.write(&mut BufWriter::new(File::create(dir.join("maps.wsd")).unwrap())).unwrap();
    let recs = records();
    write_records(&mut BufWriter::new(File::create(dir.join("records.jsonl")).unwrap()), &recs).unwrap();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in &recs {
        for t in &r.tags {
            *counts.entry(t.trim_start_matches('#').to_string()).or_default() += 1;
        }
    }
    let tsv: String = counts.iter().map(|(t, c)| format!("{t}\t{c}\n")).collect();
    fs::write(dir.join("counts.tsv"), tsv).unwrap();
}

/// Every pipeline step, each as the argument list after `--config config.toml`.
pub const STEPS: &[&[&str]] = &[
    &["descriptors", "pool", "--maps", "maps.wsd", "--out", "raw.wsd"],
    &["train-quantizers", "--raw", "raw.wsd", "--out", "quantizers.wsq"],
    &["descriptors", "encode", "--quantizers", "quantizers.wsq", "--raw", "raw.wsd", "--out", "storage.wsd"],
    &["index", "build", "--quantizers", "quantizers.wsq", "--storage", "storage.wsd", "--out", "index.wsi"],
    &[
        "index", "search", "--quantizers", "quantizers.wsq", "--index", "index.wsi", "--queries", "storage.wsd", "--k",
        "5", "--out", "search.jsonl",
    ],
    &[
        "dedup", "--quantizers", "quantizers.wsq", "--index", "index.wsi", "--queries", "storage.wsd", "--exact",
        "raw.wsd", "--query-exact", "raw.wsd", "--out", "verdicts.jsonl", "--review", "review.jsonl", "--summary",
        "summary.json",
    ],
    &["report", "--verdicts", "verdicts.jsonl", "--queries", "300", "--accuracy", "0.842", "--out", "report.json"],
    &["canonicalize", "--counts", "counts.tsv", "--synsets", "synsets.tsv", "--out", "canonical.tsv"],
    &[
        "vocab", "--counts", "counts.tsv", "--synsets", "synsets.tsv", "--canonical", "canonical.tsv", "--out",
        "vocab.tsv", "--records", "records.jsonl", "--relabeled", "relabeled.jsonl",
    ],
    &[
        "resample", "--records", "relabeled.jsonl", "--mode", "sqrt", "--target-multiple", "2", "--ids", "epoch.wse",
        "--masks", "epoch.wsm", "--tag-totals", "tag_totals.tsv",
    ],
    &["targets", "--records", "relabeled.jsonl", "--vocab", "vocab.tsv", "--out", "targets.jsonl"],
    &["noise", "--records", "relabeled.jsonl", "--p", "0.1", "--out", "noisy.jsonl"],
    &["schedule", "--preset", "in1k", "--minibatch", "3072", "--format", "json", "--out", "schedule.json"],
];

pub const ARTIFACTS: &[&str] = &[
    "raw.wsd",
    "quantizers.wsq",
    "storage.wsd",
    "index.wsi",
    "search.jsonl",
    "verdicts.jsonl",
    "review.jsonl",
    "summary.json",
    "report.json",
    "canonical.tsv",
    "vocab.tsv",
    "relabeled.jsonl",
    "epoch.wse",
    "epoch.wsm",
    "tag_totals.tsv",
    "targets.jsonl",
    "noisy.jsonl",
    "schedule.json",
];

/// Writes inputs into `dir` and runs every step with `extra` global flags.
pub fn run_pipeline(dir: &Path, extra: &[&str]) {
    write_inputs(dir);
    for step in STEPS {
        let mut args = vec!["--config", "config.toml"];
        args.extend_from_slice(extra);
        args.extend_from_slice(step);
        ok(dir, &args);
    }
}

pub fn artifact_paths(dir: &Path) -> Vec<PathBuf> {
    ARTIFACTS.iter().map(|a| dir.join(a)).collect()
}
