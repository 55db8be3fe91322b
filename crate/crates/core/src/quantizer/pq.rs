//! Product quantization and asymmetric distance tables.

use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::vecmath::{nearest, sq_l2};

use super::kmeans::{kmeans_train, KMeansConfig};

/// `m` independent sub-codebooks of `2^bits` centroids, each covering
/// `dim / m` consecutive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    m: usize,
    bits: u32,
    /// m × K × dsub, row-major.
    centroids: Vec<f32>,
}

/// One code per sub-space, each `< 2^bits`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PqCode(pub Vec<u16>);

impl PqCode {
    /// Packs the codes little-endian, `bits` per code, into whole bytes.
    pub fn pack(&self, bits: u32) -> Vec<u8> {
        let mut out = vec![0u8; (self.0.len() * bits as usize).div_ceil(8)];
        let mut pos = 0usize;
        for &c in &self.0 {
            for b in 0..bits as usize {
                if (c >> b) & 1 == 1 {
                    out[(pos + b) / 8] |= 1 << ((pos + b) % 8);
                }
            }
            pos += bits as usize;
        }
        out
    }

    pub fn unpack(bytes: &[u8], m: usize, bits: u32) -> Result<Self> {
        if bytes.len() * 8 < m * bits as usize {
            return Err(Error::CorruptIndex(format!(
                "{} bytes cannot hold {m} codes of {bits} bits",
                bytes.len()
            )));
        }
        let mut codes = Vec::with_capacity(m);
        let mut pos = 0usize;
        for _ in 0..m {
            let mut c = 0u16;
            for b in 0..bits as usize {
                if bytes[(pos + b) / 8] >> ((pos + b) % 8) & 1 == 1 {
                    c |= 1 << b;
                }
            }
            codes.push(c);
            pos += bits as usize;
        }
        Ok(PqCode(codes))
    }
}

/// Squared distances from each query sub-vector to every centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcTable {
    m: usize,
    k: usize,
    values: Vec<f32>,
}

impl AdcTable {
    #[inline]
    pub fn get(&self, sub: usize, code: usize) -> f32 {
        self.values[sub * self.k + code]
    }

    pub fn row(&self, sub: usize) -> &[f32] {
        &self.values[sub * self.k..(sub + 1) * self.k]
    }

    /// Approximate squared distance to the vector encoded by `codes`.
    #[inline]
    pub fn distance<I: IntoIterator<Item = usize>>(&self, codes: I) -> f32 {
        let mut acc = 0f32;
        for (s, c) in codes.into_iter().enumerate() {
            acc += self.values[s * self.k + c];
        }
        acc
    }

    pub fn sub_quantizers(&self) -> usize {
        self.m
    }
}

impl Codebook {
    pub fn new(dim: usize, m: usize, bits: u32, centroids: Vec<f32>) -> Result<Self> {
        check_shape(dim, m, bits)?;
        let k = 1usize << bits;
        if centroids.len() != m * k * (dim / m) {
            return Err(Error::invalid(format!(
                "codebook {m}x{k}x{} needs {} values, got {}",
                dim / m,
                m * k * (dim / m),
                centroids.len()
            )));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite centroid"));
        }
        Ok(Self {
            dim,
            m,
            bits,
            centroids,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sub_quantizers(&self) -> usize {
        self.m
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn k(&self) -> usize {
        1 << self.bits
    }

    pub fn dims_per_sub(&self) -> usize {
        self.dim / self.m
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// All K centroids of sub-space `sub`, row-major.
    pub fn sub_codebook(&self, sub: usize) -> &[f32] {
        let n = self.k() * self.dims_per_sub();
        &self.centroids[sub * n..(sub + 1) * n]
    }

    pub fn centroid(&self, sub: usize, code: usize) -> &[f32] {
        let d = self.dims_per_sub();
        &self.sub_codebook(sub)[code * d..(code + 1) * d]
    }

    fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has {} dimensions, codebook expects {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Nearest centroid per sub-space (lower index on ties).
    pub fn encode(&self, v: &[f32]) -> Result<PqCode> {
        self.check_dim(v)?;
        let d = self.dims_per_sub();
        Ok(PqCode(
            (0..self.m)
                .map(|s| nearest(self.sub_codebook(s), d, &v[s * d..(s + 1) * d]).0 as u16)
                .collect(),
        ))
    }

    pub fn encode_batch(&self, data: &[f32]) -> Result<Vec<PqCode>> {
        if data.len() % self.dim != 0 {
            return Err(Error::invalid(
                "batch is not rows of the codebook dimension",
            ));
        }
        Ok(par::map_rows(data, self.dim, |r| {
            self.encode(r).expect("dimension checked")
        }))
    }

    pub fn decode(&self, code: &PqCode) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.dim);
        self.decode_into(&code.0, &mut out)?;
        Ok(out)
    }

    /// Appends the reconstruction of `codes` to `out`.
    pub fn decode_into<C: Copy + Into<u64>>(&self, codes: &[C], out: &mut Vec<f32>) -> Result<()> {
        if codes.len() != self.m {
            return Err(Error::CorruptIndex(format!(
                "code has {} entries, codebook has {} sub-quantizers",
                codes.len(),
                self.m
            )));
        }
        for (s, &c) in codes.iter().enumerate() {
            let c: u64 = c.into();
            if c >= self.k() as u64 {
                return Err(Error::CorruptIndex(format!(
                    "code {c} in sub-space {s} is out of range (K = {})",
                    self.k()
                )));
            }
            out.extend_from_slice(self.centroid(s, c as usize));
        }
        Ok(())
    }

    pub fn adc_table(&self, query: &[f32]) -> Result<AdcTable> {
        self.check_dim(query)?;
        let d = self.dims_per_sub();
        let k = self.k();
        let mut values = Vec::with_capacity(self.m * k);
        for s in 0..self.m {
            let q = &query[s * d..(s + 1) * d];
            values.extend(self.sub_codebook(s).chunks_exact(d).map(|c| sq_l2(q, c)));
        }
        Ok(AdcTable {
            m: self.m,
            k,
            values,
        })
    }

    /// Mean squared reconstruction error over row-major `data`.
    pub fn quantization_error(&self, data: &[f32]) -> Result<f64> {
        let codes = self.encode_batch(data)?;
        let n = codes.len().max(1);
        let errs = par::map_range(codes.len(), |i| {
            let rec = self
                .decode(&codes[i])
                .expect("codes from encode are in range");
            f64::from(sq_l2(&rec, &data[i * self.dim..(i + 1) * self.dim]))
        });
        Ok(errs.iter().sum::<f64>() / n as f64)
    }
}

fn check_shape(dim: usize, m: usize, bits: u32) -> Result<()> {
    if m == 0 || dim == 0 || dim % m != 0 {
        return Err(Error::invalid(format!(
            "dimension d={dim} is not divisible into m={m} sub-quantizers"
        )));
    }
    if bits == 0 || bits > 16 {
        return Err(Error::invalid(format!(
            "bits per code must be in 1..=16, got {bits}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqTraining {
    pub codebook: Codebook,
    /// Final k-means objective per sub-space.
    pub sub_objectives: Vec<f64>,
}

/// Extracts the columns of sub-space `s` as contiguous rows.
pub(crate) fn sub_columns(data: &[f32], dim: usize, m: usize, s: usize) -> Vec<f32> {
    let d = dim / m;
    data.chunks_exact(dim)
        .flat_map(|r| r[s * d..(s + 1) * d].iter().copied())
        .collect()
}

/// Trains one k-means per sub-space with seeds derived from `seed`.
pub fn pq_train(
    data: &[f32],
    dim: usize,
    m: usize,
    bits: u32,
    max_iters: usize,
    seed: u64,
) -> Result<PqTraining> {
    check_shape(dim, m, bits)?;
    if data.len() % dim != 0 {
        return Err(Error::invalid(format!(
            "{} values are not rows of {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if n < 1 << bits {
        return Err(Error::invalid(format!(
            "product quantizer with {bits} bits needs at least {} vectors, got {n}",
            1usize << bits
        )));
    }
    let results = par::map_range(m, |s| {
        let sub = sub_columns(data, dim, m, s);
        let cfg = KMeansConfig::new(1 << bits, max_iters, seed::derive(seed, &format!("pq/{s}")));
        kmeans_train(&sub, dim / m, &cfg)
    });
    let mut centroids = Vec::with_capacity(m * (1 << bits) * (dim / m));
    let mut sub_objectives = Vec::with_capacity(m);
    for r in results {
        let km = r?;
        sub_objectives.push(km.final_objective());
        centroids.extend_from_slice(&km.centroids);
    }
    Ok(PqTraining {
        codebook: Codebook::new(dim, m, bits, centroids)?,
        sub_objectives,
    })
}
