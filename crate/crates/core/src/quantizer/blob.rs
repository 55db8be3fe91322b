//! `WSQ1` quantizer blobs.
//!
//! ```text
//! magic   "WSQ1"
//! version u32 (= 1)
//! kind    u32  1 = codebook, 2 = OPQ model, 3 = quantizer set
//! body    kind-specific; shapes as u64 followed by row-major matrices
//! ```
//!
//! Serialising a decoded blob reproduces the input bytes exactly.

use std::io::{Read, Write};

use crate::binio;
use crate::error::{Error, Result};

use super::{Codebook, OpqModel};

pub const BLOB_MAGIC: &[u8; 4] = b"WSQ1";
pub const BLOB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub(crate) enum BlobKind {
    Codebook = 1,
    Opq = 2,
    QuantizerSet = 3,
}

pub(crate) fn write_blob_header(w: &mut impl Write, kind: BlobKind) -> Result<()> {
    binio::write_magic(w, BLOB_MAGIC)?;
    binio::write_u32(w, BLOB_VERSION)?;
    binio::write_u32(w, kind as u32)
}

pub(crate) fn read_blob_header(r: &mut impl Read, kind: BlobKind) -> Result<()> {
    binio::expect_magic(r, BLOB_MAGIC)?;
    let version = binio::read_u32(r)?;
    if version != BLOB_VERSION {
        return Err(Error::format(format!(
            "unsupported quantizer blob version {version}"
        )));
    }
    let k = binio::read_u32(r)?;
    if k != kind as u32 {
        return Err(Error::format(format!(
            "blob kind {k}, expected {}",
            kind as u32
        )));
    }
    Ok(())
}

pub(crate) fn codebook_body(w: &mut impl Write, cb: &Codebook) -> Result<()> {
    binio::write_u64(w, cb.dim() as u64)?;
    binio::write_u64(w, cb.sub_quantizers() as u64)?;
    binio::write_u32(w, cb.bits())?;
    binio::write_f32s(w, cb.centroids())
}

pub(crate) fn read_codebook_body(r: &mut impl Read) -> Result<Codebook> {
    let dim = binio::read_usize(r)?;
    let m = binio::read_usize(r)?;
    let bits = binio::read_u32(r)?;
    if m == 0 || dim % m != 0 || bits == 0 || bits > 16 {
        return Err(Error::format(format!(
            "codebook shape d={dim} m={m} bits={bits}"
        )));
    }
    let n = binio::checked_len(m << bits, dim / m, "codebook")?;
    let centroids = binio::read_f32s(r, n)?;
    Codebook::new(dim, m, bits, centroids).map_err(|e| Error::format(e.to_string()))
}

pub(crate) fn opq_body(w: &mut impl Write, model: &OpqModel) -> Result<()> {
    binio::write_u64(w, model.d_in() as u64)?;
    binio::write_u64(w, model.d_out() as u64)?;
    binio::write_f64s(w, model.rotation())?;
    codebook_body(w, model.codebook())
}

pub(crate) fn read_opq_body(r: &mut impl Read) -> Result<OpqModel> {
    let d_in = binio::read_usize(r)?;
    let d_out = binio::read_usize(r)?;
    let rotation = binio::read_f64s(r, binio::checked_len(d_in, d_out, "rotation")?)?;
    let codebook = read_codebook_body(r)?;
    OpqModel::new(d_in, d_out, rotation, codebook).map_err(|e| Error::format(e.to_string()))
}

pub fn write_codebook(w: &mut impl Write, cb: &Codebook) -> Result<()> {
    write_blob_header(w, BlobKind::Codebook)?;
    codebook_body(w, cb)
}

pub fn read_codebook(r: &mut impl Read) -> Result<Codebook> {
    read_blob_header(r, BlobKind::Codebook)?;
    read_codebook_body(r)
}

pub fn write_opq(w: &mut impl Write, model: &OpqModel) -> Result<()> {
    write_blob_header(w, BlobKind::Opq)?;
    opq_body(w, model)
}

pub fn read_opq(r: &mut impl Read) -> Result<OpqModel> {
    read_blob_header(r, BlobKind::Opq)?;
    read_opq_body(r)
}
