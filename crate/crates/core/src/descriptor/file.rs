//! `WSD1` descriptor container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    "WSD1"
//! dtype    u32   1 = f32 rows, 2 = u8 scalar-quantized rows, 3 = f32 feature maps
//! dim      u32   row length (channel count for feature maps)
//! count    u64   number of rows / maps
//! dtype 2: min[dim] f32, step[dim] f32
//! dtype 3: height u32, width u32
//! payload  row-major; feature maps are C×H×W each
//! ```
//!
//! Row `i` is image id `i`.

use std::io::{Read, Write};

use crate::binio;
use crate::error::{Error, Result};

use super::{FeatureMap, ScalarQuantized, ScalarQuantizer};

const MAGIC: &[u8; 4] = b"WSD1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum DType {
    F32 = 1,
    U8 = 2,
    FeatureMapF32 = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DescriptorFile {
    F32 {
        dim: usize,
        rows: Vec<f32>,
    },
    U8 {
        quantizer: ScalarQuantizer,
        rows: Vec<u8>,
    },
    FeatureMaps {
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f32>,
    },
}

impl DescriptorFile {
    pub fn dtype(&self) -> DType {
        match self {
            DescriptorFile::F32 { .. } => DType::F32,
            DescriptorFile::U8 { .. } => DType::U8,
            DescriptorFile::FeatureMaps { .. } => DType::FeatureMapF32,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DescriptorFile::F32 { dim, .. } => *dim,
            DescriptorFile::U8 { quantizer, .. } => quantizer.dim(),
            DescriptorFile::FeatureMaps { channels, .. } => *channels,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            DescriptorFile::F32 { dim, rows } => rows.len() / dim,
            DescriptorFile::U8 { quantizer, rows } => rows.len() / quantizer.dim(),
            DescriptorFile::FeatureMaps {
                channels,
                height,
                width,
                values,
            } => values.len() / (channels * height * width),
        }
    }

    pub fn f32_rows(dim: usize, rows: Vec<f32>) -> Result<Self> {
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values are not rows of {dim}",
                rows.len()
            )));
        }
        Ok(DescriptorFile::F32 { dim, rows })
    }

    pub fn u8_rows(quantizer: ScalarQuantizer, codes: &[ScalarQuantized]) -> Result<Self> {
        let mut rows = Vec::with_capacity(codes.len() * quantizer.dim());
        for c in codes {
            if c.codes.len() != quantizer.dim() {
                return Err(Error::invalid("code length does not match quantizer"));
            }
            rows.extend_from_slice(&c.codes);
        }
        Ok(DescriptorFile::U8 { quantizer, rows })
    }

    pub fn feature_maps(maps: &[FeatureMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::EmptyInput("no feature maps".into()))?;
        let (channels, height, width) = (first.channels(), first.height(), first.width());
        let mut values = Vec::with_capacity(maps.len() * channels * height * width);
        for m in maps {
            if (m.channels(), m.height(), m.width()) != (channels, height, width) {
                return Err(Error::invalid(
                    "feature maps in one file must share a shape",
                ));
            }
            values.extend_from_slice(m.values());
        }
        Ok(DescriptorFile::FeatureMaps {
            channels,
            height,
            width,
            values,
        })
    }

    /// Row `i` of an f32 file.
    pub fn f32_row(&self, i: usize) -> Option<&[f32]> {
        match self {
            DescriptorFile::F32 { dim, rows } => rows.get(i * dim..(i + 1) * dim),
            _ => None,
        }
    }

    /// Row `i` of an 8-bit file.
    pub fn u8_row(&self, i: usize) -> Option<ScalarQuantized> {
        match self {
            DescriptorFile::U8 { quantizer, rows } => {
                let d = quantizer.dim();
                rows.get(i * d..(i + 1) * d)
                    .map(|c| ScalarQuantized { codes: c.to_vec() })
            }
            _ => None,
        }
    }

    pub fn map(&self, i: usize) -> Option<Result<FeatureMap>> {
        match self {
            DescriptorFile::FeatureMaps {
                channels,
                height,
                width,
                values,
            } => {
                let n = channels * height * width;
                values
                    .get(i * n..(i + 1) * n)
                    .map(|v| FeatureMap::new(*channels, *height, *width, v.to_vec()))
            }
            _ => None,
        }
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        binio::write_magic(w, MAGIC)?;
        binio::write_u32(w, self.dtype() as u32)?;
        let dim = u32::try_from(self.dim()).map_err(|_| Error::invalid("dimension exceeds u32"))?;
        binio::write_u32(w, dim)?;
        binio::write_u64(w, self.count() as u64)?;
        match self {
            DescriptorFile::F32 { rows, .. } => binio::write_f32s(w, rows),
            DescriptorFile::U8 { quantizer, rows } => {
                binio::write_f32s(w, quantizer.min())?;
                binio::write_f32s(w, quantizer.step())?;
                w.write_all(rows)?;
                Ok(())
            }
            DescriptorFile::FeatureMaps {
                height,
                width,
                values,
                ..
            } => {
                binio::write_u32(w, *height as u32)?;
                binio::write_u32(w, *width as u32)?;
                binio::write_f32s(w, values)
            }
        }
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        binio::expect_magic(r, MAGIC)?;
        let dtype = binio::read_u32(r)?;
        let dim = binio::read_u32(r)? as usize;
        let count = binio::read_usize(r)?;
        if dim == 0 {
            return Err(Error::format("descriptor dimension is zero"));
        }
        match dtype {
            1 => {
                let rows = binio::read_f32s(r, binio::checked_len(count, dim, "f32 rows")?)?;
                Ok(DescriptorFile::F32 { dim, rows })
            }
            2 => {
                let min = binio::read_f32s(r, dim)?;
                let step = binio::read_f32s(r, dim)?;
                let quantizer = ScalarQuantizer::from_tables(min, step)
                    .map_err(|e| Error::format(e.to_string()))?;
                let mut rows = vec![0u8; binio::checked_len(count, dim, "u8 rows")?];
                r.read_exact(&mut rows)?;
                Ok(DescriptorFile::U8 { quantizer, rows })
            }
            3 => {
                let height = binio::read_u32(r)? as usize;
                let width = binio::read_u32(r)? as usize;
                if height == 0 || width == 0 {
                    return Err(Error::format("feature map with zero spatial size"));
                }
                let per = binio::checked_len(dim, height * width, "feature map")?;
                let values = binio::read_f32s(r, binio::checked_len(count, per, "feature maps")?)?;
                Ok(DescriptorFile::FeatureMaps {
                    channels: dim,
                    height,
                    width,
                    values,
                })
            }
            other => Err(Error::format(format!("unknown descriptor dtype {other}"))),
        }
    }
}
