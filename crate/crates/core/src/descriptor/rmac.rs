//! Regional maximum activations of convolutions.

use crate::error::{Error, Result};
use crate::par;

/// A C×H×W activation volume, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite activation at offset {i}"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.values[c * plane..(c + 1) * plane]
    }

    /// Copy of the sub-window starting at (`top`, `left`).
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::invalid(format!(
                "crop {height}x{width}+{top}+{left} exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            let plane = self.channel(c);
            for y in top..top + height {
                values.extend_from_slice(
                    &plane[y * self.width + left..y * self.width + left + width],
                );
            }
        }
        Self::new(self.channels, height, width, values)
    }
}

/// Axis-aligned pooling window in feature-map coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

const OVERLAP: f64 = 0.4;

/// The pooling grid: the whole map, then at each scale `l` in `1..=scales`
/// square regions of side `floor(2·min(H,W)/(l+1))` spread uniformly, with
/// the number of regions along the longer side picked so neighbours overlap
/// by about 40%.
pub fn rmac_regions(height: usize, width: usize, scales: usize) -> Result<Vec<Region>> {
    if scales == 0 {
        return Err(Error::invalid("R-MAC needs at least one scale"));
    }
    let short = height.min(width);
    let long = height.max(width);
    let smallest = 2 * short / (scales + 1);
    if smallest == 0 {
        let dim = if height <= width { "height" } else { "width" };
        return Err(Error::DegenerateInput(format!(
            "feature map {dim} {short} is below the minimum region size for {scales} scales \
             (need at least {})",
            (scales + 1).div_ceil(2)
        )));
    }

    // Extra regions along the long side, chosen from 2..=7 steps.
    let w = short as f64;
    let mut best = (0usize, f64::INFINITY);
    for (i, steps) in (2..=7).enumerate() {
        let b = (long - short) as f64 / f64::from(steps - 1);
        let score = (((w * w - w * b) / (w * w)) - OVERLAP).abs();
        if score < best.1 {
            best = (i, score);
        }
    }
    let (extra_w, extra_h) = match height.cmp(&width) {
        std::cmp::Ordering::Less => (best.0 + 1, 0),
        std::cmp::Ordering::Greater => (0, best.0 + 1),
        std::cmp::Ordering::Equal => (0, 0),
    };

    let mut regions = vec![Region {
        top: 0,
        left: 0,
        height,
        width,
    }];
    for l in 1..=scales {
        let side = 2 * short / (l + 1);
        let half = (side as f64 / 2.0 - 1.0).floor();
        let starts = |extent: usize, extra: usize| -> Vec<usize> {
            let n = l + extra;
            let b = if n == 1 {
                0.0
            } else {
                (extent - side) as f64 / (n - 1) as f64
            };
            (0..n)
                .map(|i| ((half + i as f64 * b).floor() - half) as usize)
                .map(|s| s.min(extent - side))
                .collect()
        };
        let tops = starts(height, extra_h);
        let lefts = starts(width, extra_w);
        for &top in &tops {
            for &left in &lefts {
                regions.push(Region {
                    top,
                    left,
                    height: side,
                    width: side,
                });
            }
        }
    }
    Ok(regions)
}

/// Pools `map` into a unit-norm descriptor with one entry per channel.
///
/// Each region is max-pooled per channel and L2-normalised; the region
/// vectors are summed and the sum normalised again. Regions whose pooled
/// vector is all zero contribute nothing.
pub fn rmac_pool(map: &FeatureMap, scales: usize) -> Result<Vec<f32>> {
    let regions = rmac_regions(map.height, map.width, scales)?;
    let width = map.width;

    // pooled[c * R + r] = max of channel c over region r
    let pooled: Vec<Vec<f32>> = par::map_range(map.channels, |c| {
        let plane = map.channel(c);
        regions
            .iter()
            .map(|reg| {
                let mut m = f32::NEG_INFINITY;
                for y in reg.top..reg.top + reg.height {
                    let row = &plane[y * width + reg.left..y * width + reg.left + reg.width];
                    for &v in row {
                        m = m.max(v);
                    }
                }
                m
            })
            .collect()
    });

    let mut acc = vec![0f64; map.channels];
    for r in 0..regions.len() {
        let norm = pooled
            .iter()
            .map(|p| f64::from(p[r]).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        for (a, p) in acc.iter_mut().zip(&pooled) {
            *a += f64::from(p[r]) / norm;
        }
    }
    let total = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::DegenerateInput(
            "feature map pools to a zero descriptor".into(),
        ));
    }
    Ok(acc.iter().map(|a| (a / total) as f32).collect())
}
