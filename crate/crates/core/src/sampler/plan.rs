use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::seed;

use super::{Corpus, FrequencyTable, ROUNDING_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No replication.
    Natural,
    /// `φ(x) = x`: every tag at least `t` times in expectation.
    Uniform,
    /// `φ(x) = √x`.
    Sqrt,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Self::Natural),
            "uniform" => Ok(Self::Uniform),
            "sqrt" => Ok(Self::Sqrt),
            _ => Err(Error::invalid(format!("unknown sampling mode {s:?} (natural, uniform, sqrt)"))),
        }
    }
}

impl Mode {
    fn phi(self, x: f64) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Uniform => x,
            Self::Sqrt => x.sqrt(),
        }
    }

    fn phi_inverse(self, y: f64) -> f64 {
        match self {
            Self::Natural => f64::INFINITY,
            Self::Uniform => y,
            Self::Sqrt => y * y,
        }
    }
}

/// `max(1, φ(t/f))`.
pub fn replication_factor(f: u64, t: f64, mode: Mode) -> Result<f64> {
    if f == 0 || !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("frequency {f} and threshold {t} must be positive")));
    }
    Ok(mode.phi(t / f as f64).max(1.0))
}

/// `⌊r + 1 − u⌋` for `u ∈ (0, 1]`: `⌊r⌋ + 1` with probability `frac(r)`.
///
/// Sharing `u` across every quantity rounded for one image makes all its
/// rounded counts move together, so counts are monotone in `r`.
#[inline]
pub fn stochastic_round(r: f64, u: f64) -> u64 {
    (r + 1.0 - u).floor() as u64
}

/// One uniform in `(0, 1]` per image, drawn from a per-image stream.
pub fn rounding_uniforms(images: usize, seed: u64) -> Vec<f64> {
    let s = seed::derive(seed, ROUNDING_LABEL);
    par::map_range(images, |i| first_uniform(&mut seed::stream(s, i as u64)))
}

pub(crate) fn first_uniform(rng: &mut impl Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationPlan {
    pub mode: Mode,
    pub threshold: f64,
    /// Per tag.
    pub tag_factors: Vec<f64>,
    /// Per image: the largest factor among its tags, 1 for untagged images.
    pub image_factors: Vec<f64>,
}

impl ReplicationPlan {
    pub fn new(corpus: &Corpus, freqs: &FrequencyTable, mode: Mode, threshold: f64) -> Result<Self> {
        if freqs.counts().len() != corpus.vocab().len() {
            return Err(Error::invalid("frequency table does not match the corpus vocabulary"));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::invalid(format!("threshold {threshold} must be positive")));
        }
        let tag_factors: Vec<f64> = freqs
            .counts()
            .iter()
            // a tag no image carries never drives a copy
            .map(|&f| if f == 0 { Ok(1.0) } else { replication_factor(f, threshold, mode) })
            .collect::<Result<_>>()?;
        let image_factors = corpus
            .all_tags()
            .iter()
            .map(|tags| tags.iter().map(|&t| tag_factors[t as usize]).fold(1.0, f64::max))
            .collect();
        Ok(Self { mode, threshold, tag_factors, image_factors })
    }

    /// Copies of each image under the rounding uniforms of `seed`.
    pub fn copies(&self, seed: u64) -> Vec<u64> {
        rounded_copies(&self.image_factors, &rounding_uniforms(self.image_factors.len(), seed))
    }

    /// Total materialised length for `seed`.
    pub fn length(&self, seed: u64) -> u64 {
        self.copies(seed).iter().sum()
    }

    /// Per-tag occurrence totals of the list `build_epoch_list` would
    /// produce for `seed`, counted without materialising it.
    pub fn tag_totals(&self, corpus: &Corpus, seed: u64) -> Vec<u64> {
        let uniforms = rounding_uniforms(corpus.len(), seed);
        let mut out = vec![0u64; self.tag_factors.len()];
        for (i, tags) in corpus.all_tags().iter().enumerate() {
            let copies = stochastic_round(self.image_factors[i], uniforms[i]);
            for &t in tags {
                out[t as usize] += stochastic_round(self.tag_factors[t as usize], uniforms[i]).min(copies);
            }
        }
        out
    }
}

pub fn rounded_copies(factors: &[f64], uniforms: &[f64]) -> Vec<u64> {
    factors.iter().zip(uniforms).map(|(&r, &u)| stochastic_round(r, u)).collect()
}

/// Smallest threshold (up to float resolution) whose materialised list for
/// `seed` has at least `target` entries. Length is non-decreasing in `t`, so
/// bisection finds it; generically the length then equals `target`.
pub fn select_threshold(corpus: &Corpus, freqs: &FrequencyTable, target: u64, mode: Mode, seed: u64) -> Result<f64> {
    let n = corpus.len() as u64;
    if target < n {
        return Err(Error::invalid(format!("target length {target} is below the {n} images in the corpus")));
    }
    if n == 0 {
        return Err(Error::invalid("corpus is empty"));
    }
    let fmin_all = freqs.counts().iter().copied().min().unwrap_or(1);
    if target == n {
        return Ok(fmin_all as f64);
    }
    if mode == Mode::Natural {
        if target as f64 <= n as f64 * 1.01 {
            return Ok(fmin_all as f64);
        }
        return Err(Error::invalid(format!("natural sampling keeps {n} entries and cannot reach {target}")));
    }
    // r(I) = φ(t / rarest tag of I); untagged images never replicate
    let rarest: Vec<f64> = corpus
        .all_tags()
        .iter()
        .map(|tags| tags.iter().map(|&t| freqs.count(t) as f64).fold(f64::INFINITY, f64::min))
        .collect();
    let uniforms = rounding_uniforms(corpus.len(), seed);
    let length = |t: f64| -> u64 {
        par::map_range(rarest.len(), |i| stochastic_round(mode.phi(t / rarest[i]).max(1.0), uniforms[i])).iter().sum()
    };
    let fmax = freqs.counts().iter().copied().max().unwrap_or(1) as f64;
    let mut hi = fmax * mode.phi_inverse(target as f64 / n as f64 + 1.0);
    while length(hi) < target {
        if !hi.is_finite() {
            return Err(Error::invalid(format!("target length {target} unreachable: every image is untagged")));
        }
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if length(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
