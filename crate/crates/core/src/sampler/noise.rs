use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

use super::{FrequencyTable, NOISE_LABEL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseOutcome {
    pub records: Vec<Vec<u32>>,
    /// Flat occurrence positions that were replaced, ascending.
    pub replaced: Vec<usize>,
}

/// Replaces `round(p · occurrences)` tag occurrences, chosen without
/// replacement, by draws from the frequency-weighted tag marginal
/// conditioned on differing from the tag being replaced.
///
/// A replacement may coincide with another tag already on the same record;
/// target construction collapses such repeats.
pub fn inject_noise(records: &[Vec<u32>], p: f64, freqs: &FrequencyTable, seed: u64) -> Result<NoiseOutcome> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("noise fraction p must be in [0, 1], got {p}")));
    }
    let vocab = freqs.counts().len();
    if vocab < 2 {
        return Err(Error::invalid("noise needs at least two tags to exclude the replaced one"));
    }
    if records.iter().flatten().any(|&t| t as usize >= vocab) {
        return Err(Error::invalid("record tag outside the frequency table"));
    }
    let total: usize = records.iter().map(Vec::len).sum();
    let count = (p * total as f64).round() as usize;
    let mut rng = seed::rng(seed::derive(seed, NOISE_LABEL));
    let mut replaced = index::sample(&mut rng, total, count).into_vec();
    replaced.sort_unstable();
    let marginal = WeightedIndex::new(freqs.counts()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = records.to_vec();
    let (mut rec, mut base) = (0usize, 0usize);
    for &pos in &replaced {
        while pos >= base + out[rec].len() {
            base += out[rec].len();
            rec += 1;
        }
        let slot = &mut out[rec][pos - base];
        let old = *slot;
        // rejection keeps the other tags' relative weights
        let new = loop {
            let d = marginal.sample(&mut rng) as u32;
            if d != old {
                break d;
            }
        };
        *slot = new;
    }
    Ok(NoiseOutcome { records: out, replaced })
}
