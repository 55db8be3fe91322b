//! Acceptance checks, one line per criterion. Each check builds its own
//! synthetic input and compares the library or the binary against an
//! independent oracle.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use wildset_core::dedup::{
    lower_bound_accuracy, round_display, stage1, stage2, CandidateSet, Query, DEFAULT_THRESHOLD,
};
use wildset_core::hashtag::{canonical_merge, SynsetDb};
use wildset_core::ivf::{CoarseQuantizer, DuplicatePolicy, InvertedIndex};
use wildset_core::quantizer::{kmeans_train, opq_train, pq_train, KMeansConfig, OpqConfig, PqCode};
use wildset_core::sampler::{
    inject_noise, make_target, select_threshold, Corpus, FrequencyTable, Mode, ReplicationPlan, Vocabulary,
};
use wildset_core::schedule::{pretrain_preset, pretrain_presets, scaled_lr, DecayPlan};
use wildset_core::seed;

type Outcome = Result<String, String>;

macro_rules! require {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("full-probe search equals linear ADC scan", full_probe_equivalence),
        ("planted duplicates recovered", planted_duplicates),
        ("ADC distance equals decoded distance", adc_exactness),
        ("quantizer training objectives", training_objectives),
        ("resampler flattens a Zipf corpus", resampler_flattening),
        ("noise injection", noise_injection),
        ("1/k targets", targets),
        ("hashtag canonicalization", canonicalization),
        ("schedule presets", schedule_presets),
        ("lower-bound accuracy table", lower_bound_table),
        ("CLI re-runs are byte-identical", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn sq(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `n` points of a `centres`-component Gaussian mixture in `dim` dimensions.
fn mixture(n: usize, dim: usize, centres: usize, spread: f32, seed: u64) -> Vec<f32> {
    let mut rng = seed::rng(seed);
    let means: Vec<f32> = (0..centres * dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let c = rng.random_range(0..centres);
        for j in 0..dim {
            let z: f32 = rng.sample(StandardNormal);
            out.push(means[c * dim + j] + spread * z);
        }
    }
    out
}

fn full_probe_equivalence() -> Outcome {
    const D: usize = 512;
    const K: usize = 128;
    let start = Instant::now();
    let data = mixture(10_000, D, 40, 0.5, 101);
    let queries = mixture(100, D, 40, 0.5, 101 ^ 0xFFFF);
    let coarse = CoarseQuantizer::train(&data, D, 6, 8, 7).map_err(|e| e.to_string())?;
    let residuals: Vec<f32> = data
        .chunks_exact(D)
        .flat_map(|v| {
            let c = coarse.centroid(coarse.assign(v).unwrap());
            v.iter().zip(c).map(|(x, c)| x - c).collect::<Vec<_>>()
        })
        .collect();
    let residual = pq_train(&residuals, D, 32, 8, 6, 8).map_err(|e| e.to_string())?.codebook;
    let mut index = InvertedIndex::new(coarse, residual, DuplicatePolicy::Reject).map_err(|e| e.to_string())?;
    let ids: Vec<u64> = (0..10_000).collect();
    index.add_batch(&ids, &data).map_err(|e| e.to_string())?;
    let cells = index.non_empty_cells();
    let m = index.code_len();
    let dsub = D / m;

    let mut exact = 0;
    let mut first_miss = None;
    for (qi, q) in queries.chunks_exact(D).enumerate() {
        let got = index.search(q, K, cells).map_err(|e| e.to_string())?;
        let mut scan: Vec<(f32, u64)> = Vec::with_capacity(index.len());
        for (cell, _) in index.cell_sizes() {
            let centre = index.coarse().centroid(cell);
            let shifted: Vec<f32> = q.iter().zip(&centre).map(|(x, c)| x - c).collect();
            for (id, code) in index.entries(cell) {
                let mut acc = 0f32;
                for (s, &c) in code.iter().enumerate() {
                    acc += sq(&shifted[s * dsub..(s + 1) * dsub], index.residual().centroid(s, c as usize));
                }
                scan.push((acc, id));
            }
        }
        scan.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scan.truncate(K);
        let same = got.len() == scan.len()
            && got.iter().zip(&scan).all(|(g, s)| g.id == s.1 && g.distance.to_bits() == s.0.to_bits());
        if same {
            exact += 1;
        } else if first_miss.is_none() {
            first_miss = Some(qi);
        }
    }
    let elapsed = start.elapsed();
    require!(
        exact == 100,
        "{exact}/100 queries match the scan exactly (first mismatch: query {first_miss:?})"
    );
    require!(elapsed < Duration::from_secs(60), "took {:.1}s, limit 60s", elapsed.as_secs_f64());
    Ok(format!(
        "100/100 queries identical over {cells} non-empty cells, ids and distances bitwise; {:.1}s including training",
        elapsed.as_secs_f64()
    ))
}

fn unit(v: &mut [f32]) {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `2 − 2 cos` in f64, written independently of the library's version.
fn dense_distance(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    2.0 - 2.0 * ab / (aa.sqrt() * bb.sqrt())
}

fn planted_duplicates() -> Outcome {
    const D: usize = 128;
    const BASE: usize = 1000;
    const COPIES: usize = 200;
    let mut rng = seed::rng(202);
    let mut rows: Vec<Vec<f32>> = mixture(BASE, D, 25, 2.0, 203).chunks_exact(D).map(<[f32]>::to_vec).collect();
    rows.iter_mut().for_each(|r| unit(r));
    let mut planted = Vec::new();
    for c in 0..COPIES {
        let base = rows[c * (BASE / COPIES)].clone();
        let noise: Vec<f32> = (0..D).map(|_| rng.sample(StandardNormal)).collect();
        let target = rng.random_range(0.02..0.55);
        // bisect the noise scale until the copy sits at the target distance
        let (mut lo, mut hi) = (0f32, 4f32);
        let mut copy = base.clone();
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            copy = base.iter().zip(&noise).map(|(b, n)| b + mid * n / (D as f32).sqrt()).collect();
            if dense_distance(&base, &copy) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        require!(dense_distance(&base, &copy) < 0.6, "copy {c} is not within 0.6 of its base");
        planted.push((BASE + c, c * (BASE / COPIES)));
        rows.push(copy);
    }
    let n = rows.len();
    let flat: Vec<f32> = rows.concat();

    let coarse = CoarseQuantizer::train(&flat, D, 4, 10, 204).map_err(|e| e.to_string())?;
    let residuals: Vec<f32> = rows
        .iter()
        .flat_map(|v| {
            let c = coarse.centroid(coarse.assign(v).unwrap());
            v.iter().zip(c).map(|(x, c)| x - c).collect::<Vec<_>>()
        })
        .collect();
    let residual = pq_train(&residuals, D, 16, 8, 10, 205).map_err(|e| e.to_string())?.codebook;
    let mut index = InvertedIndex::new(coarse, residual, DuplicatePolicy::Reject).map_err(|e| e.to_string())?;
    index.add_batch(&(0..n as u64).collect::<Vec<_>>(), &flat).map_err(|e| e.to_string())?;
    let store: HashMap<u64, Vec<f32>> = rows.iter().enumerate().map(|(i, r)| (i as u64, r.clone())).collect();

    // every pair the dense oracle would flag
    let mut flaggable: BTreeSet<(u64, u64)> = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && dense_distance(&rows[i], &rows[j]) <= DEFAULT_THRESHOLD {
                flaggable.insert((i as u64, j as u64));
            }
        }
    }
    for &(c, b) in &planted {
        require!(flaggable.contains(&(c as u64, b as u64)), "planted pair ({c}, {b}) missing from the oracle");
    }

    let queries: Vec<Query> = rows.iter().enumerate().map(|(i, r)| Query { id: i as u64, vector: Some(r) }).collect();
    let run = |nprobe: usize| -> Result<Vec<CandidateSet>, String> {
        stage1(&index, &queries, 128, nprobe)
            .into_iter()
            .map(|r| r.map_err(|f| format!("query {} failed: {}", f.query_id, f.reason)))
            .collect()
    };
    let recall = |sets: &[CandidateSet]| -> usize {
        sets.iter()
            .flat_map(|s| s.candidates.iter().map(move |c| (s.query_id, c.id)))
            .filter(|p| flaggable.contains(p))
            .count()
    };

    let full = run(index.non_empty_cells())?;
    let (mut fp, mut fneg, mut worst) = (0, 0, 0f64);
    let mut flagged: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut retrieved: BTreeSet<(u64, u64)> = BTreeSet::new();
    for set in &full {
        let verdicts =
            stage2(&rows[set.query_id as usize], set, &store, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
        for v in verdicts {
            let truth = dense_distance(&rows[v.query_id as usize], &rows[v.neighbor_id as usize]);
            let d = v.distance.ok_or("stage 2 left a pair unscored")?;
            worst = worst.max((d - truth).abs());
            let should = truth <= DEFAULT_THRESHOLD;
            fp += usize::from(v.flagged && !should);
            fneg += usize::from(!v.flagged && should);
            retrieved.insert((v.query_id, v.neighbor_id));
            if v.flagged {
                flagged.insert((v.query_id, v.neighbor_id));
            }
        }
    }
    require!(fp == 0 && fneg == 0, "stage 2 disagrees with the oracle: {fp} false positives, {fneg} false negatives");
    require!(worst <= 1e-6, "stage 2 distance off by {worst:e}");
    let expected: BTreeSet<(u64, u64)> = flaggable.intersection(&retrieved).copied().collect();
    require!(flagged.is_superset(&expected), "some retrieved flaggable pairs were not flagged");
    let misses = flaggable.len() - expected.len();

    let mut levels = Vec::new();
    for nprobe in [1, 8, 64] {
        levels.push((nprobe.to_string(), recall(&run(nprobe)?)));
    }
    levels.push(("all".into(), expected.len()));
    let monotone = levels.windows(2).all(|w| w[0].1 <= w[1].1);
    let shown: Vec<String> = levels
        .iter()
        .map(|(p, r)| format!("{p}:{:.3}", *r as f64 / flaggable.len() as f64))
        .collect();
    require!(monotone, "stage 1 recall not monotone in nprobe: {}", shown.join(" "));
    Ok(format!(
        "{} flaggable pairs, {} flagged, {misses} stage-1 misses, stage 2 exact (max |Δd| {worst:.1e}); recall by nprobe {}",
        flaggable.len(),
        flagged.len(),
        shown.join(" ")
    ))
}

fn adc_exactness() -> Outcome {
    const D: usize = 64;
    let mut data = mixture(4000, D, 20, 0.4, 301);
    data.chunks_exact_mut(D).for_each(unit);
    let cb = pq_train(&data, D, 8, 8, 10, 302).map_err(|e| e.to_string())?.codebook;
    let mut rng = seed::rng(303);
    let mut worst = 0f64;
    for _ in 0..10_000 {
        let mut q: Vec<f32> = (0..D).map(|_| rng.sample(StandardNormal)).collect();
        unit(&mut q);
        let code: Vec<u16> = (0..8).map(|_| rng.random_range(0..256)).collect();
        let adc = cb.adc_table(&q).map_err(|e| e.to_string())?.distance(code.iter().map(|&c| c as usize));
        let decoded = cb.decode(&PqCode(code)).map_err(|e| e.to_string())?;
        let truth: f64 = q.iter().zip(&decoded).map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2)).sum();
        worst = worst.max((f64::from(adc) - truth).abs());
    }
    require!(worst <= 1e-5, "max |ADC − exact| = {worst:e}");
    Ok(format!("10000 pairs on unit vectors, max |ADC − exact| = {worst:.1e}"))
}

fn kmeans_objective(data: &[f32], dim: usize, centroids: &[f32]) -> f64 {
    let n = data.len() / dim;
    data.chunks_exact(dim)
        .map(|x| {
            centroids
                .chunks_exact(dim)
                .map(|c| x.iter().zip(c).map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / n as f64
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn training_objectives() -> Outcome {
    const D: usize = 16;
    let data = mixture(3000, D, 40, 0.8, 401);
    let mut by_iters = Vec::new();
    let mut recorded = Vec::new();
    for iters in 0..=15 {
        let mut cfg = KMeansConfig::new(32, iters, 402);
        cfg.tolerance = 0.0;
        let km = kmeans_train(&data, D, &cfg).map_err(|e| e.to_string())?;
        by_iters.push(kmeans_objective(&data, D, &km.centroids));
        recorded = km.objective;
    }
    require!(non_increasing(&recorded), "recorded k-means objective rises: {recorded:?}");
    require!(non_increasing(&by_iters), "recomputed k-means objective rises: {by_iters:?}");

    const D_IN: usize = 32;
    let mut rng = seed::rng(403);
    let raw: Vec<f32> = (0..3000 * D_IN)
        .map(|i| rng.sample::<f32, _>(StandardNormal) * (1.0 + (i % D_IN) as f32 / 4.0))
        .collect();
    let mut opq_by_alt = Vec::new();
    let mut orth_worst = 0f64;
    let mut opq_recorded = Vec::new();
    for alternations in 0..=8 {
        let cfg = OpqConfig {
            d_out: 16,
            m: 4,
            bits: 4,
            alternations,
            kmeans_iters: 10,
            refine_iters: 2,
            seed: 404,
        };
        let t = opq_train(&raw, D_IN, &cfg).map_err(|e| e.to_string())?;
        let model = &t.model;
        let r = model.rotation();
        let mut total = 0f64;
        for x in raw.chunks_exact(D_IN) {
            let y = model.rotate(x).map_err(|e| e.to_string())?;
            let code = model.codebook().encode(&y).map_err(|e| e.to_string())?;
            let yhat = model.codebook().decode(&code).map_err(|e| e.to_string())?;
            for (i, &xi) in x.iter().enumerate() {
                let back: f64 = (0..16).map(|j| r[i * 16 + j] * f64::from(yhat[j])).sum();
                total += (f64::from(xi) - back).powi(2);
            }
        }
        opq_by_alt.push(total / 3000.0);
        orth_worst = t.orthonormality.iter().fold(orth_worst, |m, &e| m.max(e)).max(model.orthonormality_error());
        opq_recorded = t.objective;
    }
    require!(non_increasing(&opq_recorded), "recorded OPQ objective rises: {opq_recorded:?}");
    require!(non_increasing(&opq_by_alt), "recomputed OPQ objective rises: {opq_by_alt:?}");
    require!(orth_worst < 1e-6, "‖RᵀR − I‖∞ reached {orth_worst:e}");

    let points: Vec<f32> = (0..50 * D).map(|i| ((i * 7919) % 101) as f32 + (i / D) as f32 * 0.37).collect();
    let km = kmeans_train(&points, D, &KMeansConfig::new(50, 10, 405)).map_err(|e| e.to_string())?;
    require!(km.final_objective() == 0.0, "k = n distinct points left objective {}", km.final_objective());

    Ok(format!(
        "k-means {:.4} → {:.4} over 15 iterations, OPQ {:.4} → {:.4} over 8 alternations, max ‖RᵀR − I‖∞ {orth_worst:.1e}, k = n objective 0",
        by_iters[0],
        by_iters[by_iters.len() - 1],
        opq_by_alt[0],
        opq_by_alt[opq_by_alt.len() - 1]
    ))
}

/// One tag per image, tag `k` on about `images / (H·(k + 1))` images.
fn zipf_corpus(tags: usize, images: usize) -> Corpus {
    let h: f64 = (1..=tags).map(|k| 1.0 / k as f64).sum();
    let mut counts: Vec<usize> = (1..=tags).map(|k| ((images as f64 / h / k as f64).round() as usize).max(1)).collect();
    let diff = images as i64 - counts.iter().sum::<usize>() as i64;
    counts[0] = (counts[0] as i64 + diff) as usize;
    let vocab = Vocabulary::from_tags((0..tags).map(|k| format!("tag{k}")));
    let lists: Vec<Vec<u32>> =
        counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(vec![k as u32], c)).collect();
    Corpus::from_interned(vocab, (0..images as u64).collect(), lists).unwrap()
}

fn resampler_flattening() -> Outcome {
    let corpus = zipf_corpus(1000, 1_000_000);
    let freqs = corpus.frequencies();
    let counts = freqs.counts();
    let fmax = *counts.iter().max().unwrap() as f64;
    let uniform = ReplicationPlan::new(&corpus, &freqs, Mode::Uniform, fmax).map_err(|e| e.to_string())?;
    let mut sums = vec![0f64; counts.len()];
    for s in 0..30 {
        for (acc, v) in sums.iter_mut().zip(uniform.tag_totals(&corpus, s)) {
            *acc += v as f64;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / 30.0).collect();
    let (lo, hi) = means.iter().fold((f64::INFINITY, 0f64), |(l, h), &m| (l.min(m), h.max(m)));
    let spread = (hi - lo) / lo;
    require!(spread <= 0.05, "uniform per-tag totals spread {:.2}%", 100.0 * spread);

    let tail = counts.len() - 1;
    let natural_ratio = counts[0] as f64 / counts[tail] as f64;
    let uniform_ratio = means[0] / means[tail];
    let sqrt = ReplicationPlan::new(&corpus, &freqs, Mode::Sqrt, fmax).map_err(|e| e.to_string())?;
    let st = sqrt.tag_totals(&corpus, 0);
    let sqrt_ratio = st[0] as f64 / st[tail] as f64;
    require!(
        uniform_ratio < sqrt_ratio && sqrt_ratio < natural_ratio,
        "head/tail ratios natural {natural_ratio:.1}, sqrt {sqrt_ratio:.1}, uniform {uniform_ratio:.3}"
    );

    let n = corpus.len() as u64;
    let mut worst = 0f64;
    for mode in [Mode::Uniform, Mode::Sqrt] {
        for mult in [1, 2, 5] {
            let target = mult * n;
            let t = select_threshold(&corpus, &freqs, target, mode, 9).map_err(|e| e.to_string())?;
            let len = ReplicationPlan::new(&corpus, &freqs, mode, t).map_err(|e| e.to_string())?.length(9);
            let err = (len as f64 - target as f64).abs() / target as f64;
            require!(err <= 0.01, "{mode:?} ×{mult}: length {len} vs target {target}");
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "uniform totals within {:.3}% over 30 seeds; head/tail natural {natural_ratio:.0} > sqrt {sqrt_ratio:.1} > uniform {uniform_ratio:.3}; worst length error {:.1e}",
        100.0 * spread,
        worst
    ))
}

fn noise_injection() -> Outcome {
    const TAGS: usize = 20;
    let weights: Vec<f64> = (1..=TAGS).map(|k| 1.0 / k as f64).collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&weights).unwrap();
    let mut rng = seed::rng(601);
    let records: Vec<Vec<u32>> = (0..100_000).map(|_| (0..4).map(|_| dist.sample(&mut rng) as u32).collect()).collect();
    let mut counts = vec![0u64; TAGS];
    records.iter().flatten().for_each(|&t| counts[t as usize] += 1);
    let total: u64 = counts.iter().sum();
    let freqs = FrequencyTable::new(counts.clone(), records.len()).map_err(|e| e.to_string())?;
    let flat: Vec<u32> = records.iter().flatten().copied().collect();

    let mut draws = 0;
    let mut shown = Vec::new();
    for (i, p) in [0.10, 0.25].into_iter().enumerate() {
        let out = inject_noise(&records, p, &freqs, 602 + i as u64).map_err(|e| e.to_string())?;
        let expect = (p * total as f64).round() as usize;
        require!(out.replaced.len() == expect, "p={p}: replaced {} of {total}, expected {expect}", out.replaced.len());
        let after: Vec<u32> = out.records.iter().flatten().copied().collect();
        let replaced: BTreeSet<usize> = out.replaced.iter().copied().collect();
        // observed[i][j]: tag i replaced by tag j
        let mut observed = vec![vec![0u64; TAGS]; TAGS];
        for (pos, (&old, &new)) in flat.iter().zip(&after).enumerate() {
            if replaced.contains(&pos) {
                require!(old != new, "p={p}: position {pos} replaced by its own tag");
                observed[old as usize][new as usize] += 1;
            } else {
                require!(old == new, "p={p}: position {pos} changed without being selected");
            }
        }
        draws += out.replaced.len();

        // stratified by the replaced tag; sparse cells pooled per stratum
        let (mut stat, mut dof) = (0f64, 0f64);
        for old in 0..TAGS {
            let n: u64 = observed[old].iter().sum();
            if n == 0 {
                continue;
            }
            let rest = (total - counts[old]) as f64;
            let (mut pool_o, mut pool_e, mut bins) = (0f64, 0f64, 0);
            for new in (0..TAGS).filter(|&j| j != old) {
                let e = n as f64 * counts[new] as f64 / rest;
                let o = observed[old][new] as f64;
                if e < 5.0 {
                    pool_o += o;
                    pool_e += e;
                } else {
                    stat += (o - e).powi(2) / e;
                    bins += 1;
                }
            }
            if pool_e > 0.0 {
                stat += (pool_o - pool_e).powi(2) / pool_e;
                bins += 1;
            }
            dof += f64::from(bins - 1);
        }
        let pvalue = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
        require!(pvalue >= 0.01, "p={p}: chi-square {stat:.1} on {dof} dof, p-value {pvalue:.4}");
        shown.push(format!("p={p}: χ²={stat:.1}/{dof} dof, p-value {pvalue:.3}"));
    }
    Ok(format!("{draws} replacements, none same-tag, counts exact; {}", shown.join("; ")))
}

fn targets() -> Outcome {
    let pool: Vec<String> = (0..50).map(|k| format!("tag{k}")).collect();
    let vocab = Vocabulary::from_tags(pool.iter().take(30));
    let mut rng = seed::rng(701);
    let (mut emitted, mut dropped, mut worst) = (0, 0, 0f64);
    for _ in 0..10_000 {
        let k = rng.random_range(0..8);
        let tags: Vec<&str> = (0..k).map(|_| pool.choose(&mut rng).unwrap().as_str()).collect();
        let distinct: BTreeSet<&str> = tags.iter().copied().filter(|t| vocab.get(t).is_some()).collect();
        match make_target(&tags, &vocab) {
            Some(v) => {
                let sum: f64 = v.entries.iter().map(|e| e.1).sum();
                worst = worst.max((sum - 1.0).abs());
                require!((sum - 1.0).abs() <= 1e-9, "weights of {tags:?} sum to {sum}");
                require!(v.support() == distinct.len(), "support {} for {tags:?}", v.support());
                emitted += 1;
            }
            None => {
                require!(distinct.is_empty(), "{tags:?} dropped despite in-vocabulary tags");
                dropped += 1;
            }
        }
    }
    Ok(format!("{emitted} vectors emitted, {dropped} records dropped, max |Σw − 1| {worst:.1e}"))
}

fn canonicalization() -> Outcome {
    let mut rng = seed::rng(801);
    let names: Vec<String> = (0..200).map(|k| format!("tag{k}")).collect();
    let synsets = ["s1", "s2", "s3", "s4", "s5", "s6"];
    let mut db = SynsetDb::new();
    let mut truth: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for name in &names {
        let k = rng.random_range(0..3);
        let s: BTreeSet<&str> = (0..k).map(|_| *synsets.choose(&mut rng).unwrap()).collect();
        if !s.is_empty() {
            db.insert(name, s.iter().copied());
        }
        truth.insert(name, s);
    }
    let mut groups_seen = 0;
    for _ in 0..10_000 {
        let size = rng.random_range(1..30);
        let corpus: Vec<(String, u64)> =
            (0..size).map(|_| (names.choose(&mut rng).unwrap().clone(), rng.random_range(1..1000))).collect();
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for (t, c) in &corpus {
            *freq.entry(t).or_default() += c;
        }
        let cmap = canonical_merge(&corpus, &db);
        let mut covered = BTreeSet::new();
        for g in cmap.groups() {
            let first = &truth[g.members[0].as_str()];
            for m in &g.members {
                require!(covered.insert(m.as_str()), "{m} in two groups");
                require!(&truth[m.as_str()] == first, "group {:?} mixes sense sets", g.members);
            }
            require!(first.len() > 0 || g.members.len() == 1, "tags without senses merged: {:?}", g.members);
            let top = g.members.iter().map(|m| freq[m.as_str()]).max().unwrap();
            require!(freq[g.canonical.as_str()] == top, "canonical {} is not the most frequent", g.canonical);
            require!(g.count == g.members.iter().map(|m| freq[m.as_str()]).sum::<u64>(), "group count wrong");
        }
        require!(covered.len() == freq.len(), "groups cover {} of {} tags", covered.len(), freq.len());
        // equal non-empty sense sets must share a group
        let mut by_sense: BTreeMap<&BTreeSet<&str>, BTreeSet<&str>> = BTreeMap::new();
        for t in freq.keys() {
            if !truth[t].is_empty() {
                by_sense.entry(&truth[t]).or_default().insert(t);
            }
        }
        for members in by_sense.values() {
            let first = cmap.canonical(members.first().unwrap()).unwrap();
            require!(members.iter().all(|m| cmap.canonical(m) == Some(first)), "{members:?} split across groups");
        }
        groups_seen += cmap.groups().len();
    }

    let db = SynsetDb::parse("brown bear\tn02132136\nursus arctos\tn02132136\n").map_err(|e| e.to_string())?;
    let corpus = vec![("brownbear".to_string(), 120), ("ursusarctos".to_string(), 30), ("selfie".to_string(), 900)];
    let cmap = canonical_merge(&corpus, &db);
    require!(
        cmap.canonical("ursusarctos") == Some("brownbear") && cmap.canonical("brownbear") == Some("brownbear"),
        "fixture did not merge: {:?}",
        cmap.groups()
    );
    let lone = vec![("selfie".to_string(), 5), ("tbt".to_string(), 5), ("love".to_string(), 5)];
    require!(canonical_merge(&lone, &db).groups().len() == 3, "tags without senses were merged");
    Ok(format!("10000 random tag sets ({groups_seen} groups) partition cleanly; brownbear/ursusarctos merge"))
}

fn schedule_presets() -> Outcome {
    let err = |e: wildset_core::Error| e.to_string();
    let in1k = pretrain_preset("in1k").map_err(err)?;
    require!(in1k.steps.as_deref() == Some(&[30.0, 30.0, 30.0, 10.0][..]), "in1k steps {:?}", in1k.steps);
    require!(in1k.total_epochs == Some(100.0), "in1k length {:?}", in1k.total_epochs);
    require!(in1k.base_lr == 0.1 && in1k.reference_batch == 256, "in1k lr {} per {}", in1k.base_lr, in1k.reference_batch);
    require!(in1k.lr_decay.value().map_err(err)? == 0.1, "in1k decay factor");
    let ig = pretrain_preset("ig-940m-1.5k").map_err(err)?;
    require!(ig.total_images() == 1925e6, "ig-940m-1.5k length {}", ig.total_images());
    require!(
        matches!(ig.decay_plan().map_err(err)?, DecayPlan::EqualSteps { decays: 20, factor } if factor == 0.5),
        "ig-940m-1.5k decays {:?}",
        ig.decay_plan()
    );
    let lr = scaled_lr(0.1, 256, 8064).map_err(err)?;
    require!((lr - 3.15).abs() < 1e-12, "scaled_lr(8064) = {lr}");
    let mut counts = Vec::new();
    for p in pretrain_presets() {
        let spec = p.spec(None, None).map_err(err)?;
        let plateaus = spec.plateaus().map_err(err)?.len();
        let decays = spec.decay.decays() as usize;
        require!(plateaus == decays + 1, "{}: {plateaus} plateaus for {decays} decays", p.name);
        counts.push(format!("{} {plateaus}", p.name));
    }
    Ok(format!("table rows match, scaled_lr(8064) = {lr:.6}; plateaus: {}", counts.join(", ")))
}

fn lower_bound_table() -> Outcome {
    let rows = [(0.842, 150, 50_000, 0.839), (0.892, 10, 5794, 0.890), (0.580, 151, 36_500, 0.576)];
    let mut shown = Vec::new();
    for (acc, dups, size, published) in rows {
        let b = lower_bound_accuracy(acc, dups, size).map_err(|e| e.to_string())?;
        require!((b - published).abs() <= 0.0005, "({acc}, {dups}, {size}) → {b}, published {published}");
        require!((round_display(b) - published).abs() < 1e-12, "{b} displays as {}", round_display(b));
        shown.push(format!("{:.1}%", 100.0 * round_display(b)));
    }
    Ok(format!("bounds {}", shown.join(", ")))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::run_pipeline(a.path(), &[]);
    common::run_pipeline(b.path(), &[]);
    let mut bytes = 0;
    for (pa, pb) in common::artifact_paths(a.path()).iter().zip(common::artifact_paths(b.path())) {
        let (x, y) = (fs::read(pa).map_err(|e| e.to_string())?, fs::read(&pb).map_err(|e| e.to_string())?);
        require!(x == y, "{} differs between runs", pa.file_name().unwrap().to_string_lossy());
        bytes += x.len();
    }
    Ok(format!(
        "{} steps twice, {} artifacts ({bytes} bytes) identical",
        common::STEPS.len(),
        common::ARTIFACTS.len()
    ))
}
