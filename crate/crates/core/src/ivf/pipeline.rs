//! The full quantizer chain from raw descriptors to index codes.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::descriptor::{
    pca_train, PcaModel, ScalarQuantized, ScalarQuantizer, EIG_FLOOR, WHITENED_DIM,
};
use crate::error::{Error, Result};
use crate::par;
use crate::quantizer::{
    codebook_body, opq_body, opq_train, pq_train, read_blob_header, read_codebook_body,
    read_opq_body, write_blob_header, BlobKind, Codebook, OpqConfig, OpqModel,
};
use crate::seed;
use crate::vecmath::l2_normalize;

use super::coarse::CoarseQuantizer;
use super::index::{DuplicatePolicy, InvertedIndex, Neighbor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSetConfig {
    pub whitened_dim: usize,
    pub eig_floor: f64,
    /// Rotation and its auxiliary codebook. `seed` is ignored; it is derived
    /// from the set's root seed.
    pub opq: OpqConfig,
    pub coarse_bits: u32,
    pub coarse_iters: usize,
    pub residual_m: usize,
    pub residual_bits: u32,
    pub residual_iters: usize,
    pub seed: u64,
}

impl Default for QuantizerSetConfig {
    fn default() -> Self {
        Self {
            whitened_dim: WHITENED_DIM,
            eig_floor: EIG_FLOOR,
            opq: OpqConfig::default(),
            coarse_bits: 14,
            coarse_iters: 25,
            residual_m: 32,
            residual_bits: 8,
            residual_iters: 25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSet {
    pub pca: PcaModel,
    pub scalar: ScalarQuantizer,
    pub opq: OpqModel,
    pub coarse: CoarseQuantizer,
    pub residual: Codebook,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSetTraining {
    pub set: QuantizerSet,
    pub opq_objective: Vec<f64>,
    pub coarse_objective: f64,
    pub residual_objective: f64,
}

impl QuantizerSet {
    /// Trains every stage on `raw` (row-major, `raw_dim` per row), each
    /// stage on the previous stage's output.
    pub fn train(
        raw: &[f32],
        raw_dim: usize,
        cfg: &QuantizerSetConfig,
    ) -> Result<QuantizerSetTraining> {
        let pca = pca_train(raw, raw_dim, cfg.whitened_dim, cfg.eig_floor)?;
        let whitened: Vec<f32> =
            par::map_rows(raw, raw_dim, |r| pca.apply(r).expect("dimension checked")).concat();
        let scalar = ScalarQuantizer::fit(&whitened, cfg.whitened_dim)?;
        let normed: Vec<f32> = par::map_rows(&whitened, cfg.whitened_dim, |r| {
            let (q, _) = scalar.encode(r).expect("dimension checked");
            let mut v = scalar.decode(&q).expect("codes from encode");
            l2_normalize(&mut v);
            v
        })
        .concat();
        let opq_cfg = OpqConfig {
            seed: seed::derive(cfg.seed, "opq"),
            ..cfg.opq
        };
        let opq = opq_train(&normed, cfg.whitened_dim, &opq_cfg)?;
        let d = opq_cfg.d_out;
        let rotated = opq.model.rotate_batch(&normed)?;
        let coarse_pq = pq_train(
            &rotated,
            d,
            2,
            cfg.coarse_bits,
            cfg.coarse_iters,
            seed::derive(cfg.seed, "coarse"),
        )?;
        let coarse_objective = coarse_pq.codebook.quantization_error(&rotated)?;
        let coarse = CoarseQuantizer::new(coarse_pq.codebook)?;
        let residuals: Vec<f32> = par::map_rows(&rotated, d, |v| {
            let c = coarse.centroid(coarse.assign(v).expect("dimension checked"));
            v.iter().zip(c).map(|(x, c)| x - c).collect::<Vec<f32>>()
        })
        .concat();
        let residual = pq_train(
            &residuals,
            d,
            cfg.residual_m,
            cfg.residual_bits,
            cfg.residual_iters,
            seed::derive(cfg.seed, "residual"),
        )?
        .codebook;
        let residual_objective = residual.quantization_error(&residuals)?;
        let set = QuantizerSet {
            pca,
            scalar,
            opq: opq.model,
            coarse,
            residual,
        };
        set.check()?;
        Ok(QuantizerSetTraining {
            set,
            opq_objective: opq.objective,
            coarse_objective,
            residual_objective,
        })
    }

    fn check(&self) -> Result<()> {
        let d = self.opq.d_out();
        if self.pca.out_dim() != self.scalar.dim() || self.scalar.dim() != self.opq.d_in() {
            return Err(Error::invalid(
                "whitened dimension differs between PCA, scalar quantizer and rotation",
            ));
        }
        if self.coarse.dim() != d || self.residual.dim() != d {
            return Err(Error::invalid(
                "index dimension differs between rotation and coarse/residual codebooks",
            ));
        }
        Ok(())
    }

    pub fn raw_dim(&self) -> usize {
        self.pca.in_dim()
    }

    pub fn index_dim(&self) -> usize {
        self.opq.d_out()
    }

    /// Raw descriptor → whitened → 8-bit storage form. Also returns how many
    /// dimensions fell outside the trained range.
    pub fn encode_storage(&self, raw: &[f32]) -> Result<(ScalarQuantized, usize)> {
        self.scalar.encode(&self.pca.apply(raw)?)
    }

    /// Storage form → dequantized, L2-normalized, rotated index form.
    pub fn index_vector(&self, storage: &ScalarQuantized) -> Result<Vec<f32>> {
        let mut v = self.scalar.decode(storage)?;
        l2_normalize(&mut v);
        self.opq.rotate(&v)
    }

    /// Dequantized and L2-normalized whitened vector, the input of the exact
    /// re-ranking stage.
    pub fn exact_vector(&self, storage: &ScalarQuantized) -> Result<Vec<f32>> {
        let mut v = self.scalar.decode(storage)?;
        l2_normalize(&mut v);
        Ok(v)
    }

    pub fn new_index(&self, policy: DuplicatePolicy) -> Result<InvertedIndex> {
        InvertedIndex::new(self.coarse.clone(), self.residual.clone(), policy)
    }

    pub fn add_storage(
        &self,
        index: &mut InvertedIndex,
        id: u64,
        storage: &ScalarQuantized,
    ) -> Result<()> {
        index.add(id, &self.index_vector(storage)?)
    }

    pub fn search_storage(
        &self,
        index: &InvertedIndex,
        storage: &ScalarQuantized,
        k: usize,
        nprobe: usize,
    ) -> Result<Vec<Neighbor>> {
        index.search(&self.index_vector(storage)?, k, nprobe)
    }

    /// SHA-256 over the serialised coarse and residual codebooks; index files
    /// record it to refuse loading against different quantizers.
    pub fn index_digest(&self) -> [u8; 32] {
        index_digest(&self.coarse, &self.residual)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        write_blob_header(w, BlobKind::QuantizerSet)?;
        self.pca.write(w)?;
        self.scalar.write(w)?;
        opq_body(w, &self.opq)?;
        codebook_body(w, self.coarse.codebook())?;
        codebook_body(w, &self.residual)
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        read_blob_header(r, BlobKind::QuantizerSet)?;
        let pca = PcaModel::read(r)?;
        let scalar = ScalarQuantizer::read(r)?;
        let opq = read_opq_body(r)?;
        let coarse = CoarseQuantizer::new(read_codebook_body(r)?)
            .map_err(|e| Error::format(e.to_string()))?;
        let residual = read_codebook_body(r)?;
        let set = Self {
            pca,
            scalar,
            opq,
            coarse,
            residual,
        };
        set.check().map_err(|e| Error::format(e.to_string()))?;
        Ok(set)
    }
}

pub(crate) fn index_digest(coarse: &CoarseQuantizer, residual: &Codebook) -> [u8; 32] {
    let mut buf = Vec::new();
    codebook_body(&mut buf, coarse.codebook()).expect("writing to memory");
    codebook_body(&mut buf, residual).expect("writing to memory");
    Sha256::digest(&buf).into()
}
