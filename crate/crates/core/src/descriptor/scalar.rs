//! 8-bit per-dimension scalar quantization for descriptor storage.

use std::io::{Read, Write};

use crate::binio;
use crate::error::{Error, Result};

/// Frozen per-dimension ranges; 256 equal buckets per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    min: Vec<f32>,
    step: Vec<f32>,
}

/// One stored descriptor: a byte per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScalarQuantized {
    pub codes: Vec<u8>,
}

impl ScalarQuantizer {
    pub fn from_range(min: Vec<f32>, max: &[f32]) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::invalid(
                "min/max tables must be non-empty and equal length",
            ));
        }
        let mut step = Vec::with_capacity(min.len());
        for (i, (&lo, &hi)) in min.iter().zip(max).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi < lo {
                return Err(Error::invalid(format!(
                    "bad range [{lo}, {hi}] on dimension {i}"
                )));
            }
            step.push(((f64::from(hi) - f64::from(lo)) / 256.0) as f32);
        }
        Ok(Self { min, step })
    }

    pub fn from_tables(min: Vec<f32>, step: Vec<f32>) -> Result<Self> {
        if min.len() != step.len() || min.is_empty() {
            return Err(Error::invalid(
                "min/step tables must be non-empty and equal length",
            ));
        }
        if step.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || min.iter().any(|m| !m.is_finite())
        {
            return Err(Error::invalid(
                "min/step tables must be finite with step >= 0",
            ));
        }
        Ok(Self { min, step })
    }

    /// Per-dimension min/max over row-major `samples`.
    pub fn fit(samples: &[f32], dim: usize) -> Result<Self> {
        if dim == 0 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(Error::invalid(
                "scalar quantizer needs at least one full sample",
            ));
        }
        let mut lo = vec![f32::INFINITY; dim];
        let mut hi = vec![f32::NEG_INFINITY; dim];
        for row in samples.chunks_exact(dim) {
            for j in 0..dim {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        Self::from_range(lo, &hi)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f32] {
        &self.min
    }

    pub fn step(&self) -> &[f32] {
        &self.step
    }

    /// Encodes `v`, returning the codes and how many dimensions fell outside
    /// the frozen range and were clamped.
    pub fn encode(&self, v: &[f32]) -> Result<(ScalarQuantized, usize)> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector has {} dimensions, quantizer expects {}",
                v.len(),
                self.dim()
            )));
        }
        let mut clamped = 0;
        let codes = v
            .iter()
            .zip(self.min.iter().zip(&self.step))
            .map(|(&x, (&lo, &step))| {
                if step == 0.0 {
                    if x != lo {
                        clamped += 1;
                    }
                    return 0;
                }
                let pos = (f64::from(x) - f64::from(lo)) / f64::from(step);
                if !(0.0..=256.0).contains(&pos) {
                    clamped += 1;
                }
                pos.floor().clamp(0.0, 255.0) as u8
            })
            .collect();
        Ok((ScalarQuantized { codes }, clamped))
    }

    /// Bucket midpoints; dimensions with zero step decode to their minimum.
    pub fn decode(&self, q: &ScalarQuantized) -> Result<Vec<f32>> {
        if q.codes.len() != self.dim() {
            return Err(Error::invalid(format!(
                "code has {} dimensions, quantizer expects {}",
                q.codes.len(),
                self.dim()
            )));
        }
        Ok(q.codes
            .iter()
            .zip(self.min.iter().zip(&self.step))
            .map(|(&c, (&lo, &step))| {
                if step == 0.0 {
                    lo
                } else {
                    (f64::from(lo) + (f64::from(c) + 0.5) * f64::from(step)) as f32
                }
            })
            .collect())
    }

    pub(crate) fn write(&self, w: &mut impl Write) -> Result<()> {
        binio::write_u64(w, self.dim() as u64)?;
        binio::write_f32s(w, &self.min)?;
        binio::write_f32s(w, &self.step)
    }

    pub(crate) fn read(r: &mut impl Read) -> Result<Self> {
        let dim = binio::read_usize(r)?;
        binio::checked_len(dim, 1, "scalar tables")?;
        let min = binio::read_f32s(r, dim)?;
        let step = binio::read_f32s(r, dim)?;
        Self::from_tables(min, step).map_err(|e| Error::format(e.to_string()))
    }
}
