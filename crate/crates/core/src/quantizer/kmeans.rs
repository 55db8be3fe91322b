//! Lloyd's k-means with k-means++ seeding.

use log::warn;
use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::vecmath::{nearest, sq_l2};

/// Rows per block when accumulating centroid sums; fixed so the summation
/// order does not depend on the thread count.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the relative objective improvement drops below this.
    pub tolerance: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters,
            seed,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub dim: usize,
    pub k: usize,
    /// k × dim, row-major.
    pub centroids: Vec<f32>,
    /// Mean squared distance to the assigned centroid, measured once for the
    /// initial centroids and once after every update. Never increases.
    pub objective: Vec<f64>,
    /// Set when there were fewer distinct points than clusters.
    pub duplicate_centroids: bool,
}

impl KMeans {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective
            .last()
            .expect("objective has at least one entry")
    }

    pub fn assign(&self, v: &[f32]) -> usize {
        nearest(&self.centroids, self.dim, v).0
    }
}

fn check(data: &[f32], dim: usize, k: usize) -> Result<usize> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::invalid(format!(
            "{} values are not rows of {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "k-means with k={k} needs at least {k} vectors, got {n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in k-means input"));
    }
    Ok(n)
}

/// Trains `cfg.k` centroids on row-major `data`.
pub fn kmeans_train(data: &[f32], dim: usize, cfg: &KMeansConfig) -> Result<KMeans> {
    check(data, dim, cfg.k)?;
    let (centroids, dup) = plus_plus(data, dim, cfg.k, cfg.seed);
    if dup {
        warn!(
            "k-means: fewer distinct vectors than k={}; some centroids coincide",
            cfg.k
        );
    }
    let mut km = kmeans_refine(data, dim, centroids, cfg.max_iters, cfg.tolerance)?;
    km.duplicate_centroids = dup;
    Ok(km)
}

fn plus_plus(data: &[f32], dim: usize, k: usize, seed: u64) -> (Vec<f32>, bool) {
    let n = data.len() / dim;
    let mut rng = seed::rng(seed);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f32> = par::map_rows(data, dim, |r| sq_l2(r, &centroids[..dim]));
    let mut dup = false;
    for _ in 1..k {
        let total: f64 = d2.iter().map(|&d| f64::from(d)).sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += f64::from(d);
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            dup = true;
            rng.random_range(0..n)
        };
        let new = data[pick * dim..(pick + 1) * dim].to_vec();
        centroids.extend_from_slice(&new);
        let updated = par::map_rows(data, dim, |r| sq_l2(r, &new));
        for (d, u) in d2.iter_mut().zip(updated) {
            *d = d.min(u);
        }
    }
    (centroids, dup)
}

fn assign_all(data: &[f32], dim: usize, centroids: &[f32]) -> (Vec<u32>, Vec<f32>, f64) {
    let pairs = par::map_rows(data, dim, |r| nearest(centroids, dim, r));
    let n = pairs.len();
    let labels = pairs.iter().map(|p| p.0 as u32).collect();
    let errs: Vec<f32> = pairs.iter().map(|p| p.1).collect();
    let obj = errs.iter().map(|&e| f64::from(e)).sum::<f64>() / n as f64;
    (labels, errs, obj)
}

fn update(data: &[f32], dim: usize, k: usize, labels: &[u32], errs: &[f32], centroids: &mut [f32]) {
    let n = labels.len();
    let blocks = par::map_range(n.div_ceil(BLOCK), |b| {
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            let l = labels[i] as usize;
            counts[l] += 1;
            for (s, &x) in sums[l * dim..(l + 1) * dim]
                .iter_mut()
                .zip(&data[i * dim..(i + 1) * dim])
            {
                *s += f64::from(x);
            }
        }
        (sums, counts)
    });
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (s, c) in blocks {
        sums.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }

    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    for j in 0..k {
        if counts[j] > 0 {
            for d in 0..dim {
                centroids[j * dim + d] = (sums[j * dim + d] / counts[j] as f64) as f32;
            }
        }
    }
    if !empty.is_empty() {
        // Re-seed empty clusters at the worst-quantized points.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| errs[b].total_cmp(&errs[a]).then(a.cmp(&b)));
        for (&j, &i) in empty.iter().zip(&order) {
            centroids[j * dim..(j + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
        }
    }
}

/// Runs Lloyd iterations starting from `centroids`.
///
/// Stops after `max_iters` updates, when the relative improvement falls below
/// `tolerance`, or when an update would raise the objective through rounding
/// (in which case the previous centroids are kept).
pub fn kmeans_refine(
    data: &[f32],
    dim: usize,
    centroids: Vec<f32>,
    max_iters: usize,
    tolerance: f64,
) -> Result<KMeans> {
    if centroids.is_empty() || centroids.len() % dim != 0 {
        return Err(Error::invalid(
            "initial centroids are not rows of the data dimension",
        ));
    }
    let k = centroids.len() / dim;
    check(data, dim, k)?;
    let mut centroids = centroids;
    let (mut labels, mut errs, obj) = assign_all(data, dim, &centroids);
    let mut objective = vec![obj];
    for _ in 0..max_iters {
        let mut next = centroids.clone();
        update(data, dim, k, &labels, &errs, &mut next);
        let (l, e, obj) = assign_all(data, dim, &next);
        let prev = *objective.last().unwrap();
        if obj > prev {
            break;
        }
        centroids = next;
        labels = l;
        errs = e;
        objective.push(obj);
        if prev - obj <= tolerance * prev {
            break;
        }
    }
    Ok(KMeans {
        dim,
        k,
        centroids,
        objective,
        duplicate_centroids: false,
    })
}
