//! `WSI1` index files.
//!
//! ```text
//! magic      "WSI1"
//! version    u32 (= 1)
//! quantizers [u8; 32]  SHA-256 of the coarse and residual codebooks
//! policy     u32       0 = reject duplicate ids, 1 = allow
//! dim        u64
//! m          u64       code bytes per entry
//! entries    u64
//! cells      u64
//! directory  cells × (cell u32, first entry u64, length u64), ascending cell
//! payload    entries × (id u64, code [u8; m]), grouped by cell
//! ```
//!
//! Everything is little-endian. The quantizers themselves live in a separate
//! `WSQ1` blob; loading checks the digest against the blob supplied.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use crate::binio;
use crate::error::{Error, Result};
use crate::quantizer::Codebook;

use super::coarse::CoarseQuantizer;
use super::index::{CellList, DuplicatePolicy, InvertedIndex};
use super::pipeline::index_digest;

pub const INDEX_MAGIC: &[u8; 4] = b"WSI1";
pub const INDEX_VERSION: u32 = 1;

pub fn write_index(w: &mut impl Write, index: &InvertedIndex) -> Result<()> {
    binio::write_magic(w, INDEX_MAGIC)?;
    binio::write_u32(w, INDEX_VERSION)?;
    w.write_all(&index_digest(&index.coarse, &index.residual))?;
    binio::write_u32(
        w,
        match index.policy {
            DuplicatePolicy::Reject => 0,
            DuplicatePolicy::Allow => 1,
        },
    )?;
    binio::write_u64(w, index.dim() as u64)?;
    binio::write_u64(w, index.code_len() as u64)?;
    binio::write_u64(w, index.count as u64)?;
    binio::write_u64(w, index.lists.len() as u64)?;
    let mut offset = 0u64;
    for (&cell, list) in &index.lists {
        binio::write_u32(w, cell)?;
        binio::write_u64(w, offset)?;
        binio::write_u64(w, list.len() as u64)?;
        offset += list.len() as u64;
    }
    let m = index.code_len();
    for list in index.lists.values() {
        for (id, code) in list.ids.iter().zip(list.codes.chunks_exact(m)) {
            binio::write_u64(w, *id)?;
            w.write_all(code)?;
        }
    }
    Ok(())
}

/// Loads an index written against `coarse` and `residual`.
pub fn read_index(
    r: &mut impl Read,
    coarse: &CoarseQuantizer,
    residual: &Codebook,
) -> Result<InvertedIndex> {
    binio::expect_magic(r, INDEX_MAGIC)?;
    let version = binio::read_u32(r)?;
    if version != INDEX_VERSION {
        return Err(Error::format(format!(
            "unsupported index version {version}"
        )));
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    if digest != index_digest(coarse, residual) {
        return Err(Error::CorruptIndex(
            "index was built with different quantizers".into(),
        ));
    }
    let policy = match binio::read_u32(r)? {
        0 => DuplicatePolicy::Reject,
        1 => DuplicatePolicy::Allow,
        p => return Err(Error::CorruptIndex(format!("unknown duplicate policy {p}"))),
    };
    let mut index = InvertedIndex::new(coarse.clone(), residual.clone(), policy)?;
    let dim = binio::read_usize(r)?;
    let m = binio::read_usize(r)?;
    if dim != index.dim() || m != index.code_len() {
        return Err(Error::CorruptIndex(format!(
            "index shape d={dim} m={m} does not match the quantizers"
        )));
    }
    let entries = binio::read_usize(r)?;
    let cells = binio::read_usize(r)?;
    binio::checked_len(entries, m + 8, "index payload")?;
    if cells > entries {
        return Err(Error::CorruptIndex(format!(
            "{cells} non-empty cells for {entries} entries"
        )));
    }
    let mut directory = Vec::with_capacity(cells);
    let mut expected = 0u64;
    let mut prev: Option<u32> = None;
    for _ in 0..cells {
        let cell = binio::read_u32(r)?;
        let offset = binio::read_u64(r)?;
        let len = binio::read_u64(r)?;
        if u64::from(cell) >= coarse.total_cells() || prev.is_some_and(|p| p >= cell) {
            return Err(Error::CorruptIndex(format!(
                "cell {cell} out of range or out of order"
            )));
        }
        if offset != expected || len == 0 {
            return Err(Error::CorruptIndex(format!(
                "cell {cell} has offset {offset}, expected {expected}"
            )));
        }
        expected += len;
        prev = Some(cell);
        directory.push((cell, len as usize));
    }
    if expected != entries as u64 {
        return Err(Error::CorruptIndex(format!(
            "directory covers {expected} of {entries} entries"
        )));
    }
    let k = residual.k() as u8;
    let mut lists = BTreeMap::new();
    let mut ids = HashSet::with_capacity(entries);
    for (cell, len) in directory {
        let mut list = CellList {
            ids: Vec::with_capacity(len),
            codes: vec![0u8; len * m],
        };
        for code in list.codes.chunks_exact_mut(m) {
            let id = binio::read_u64(r)?;
            r.read_exact(code)?;
            // K = 256 fits every byte; smaller codebooks need a range check
            if residual.k() < 256 && code.iter().any(|&c| c >= k) {
                return Err(Error::CorruptIndex(format!(
                    "entry {id} has a code outside the residual codebook"
                )));
            }
            if !ids.insert(id) && policy == DuplicatePolicy::Reject {
                return Err(Error::CorruptIndex(format!(
                    "duplicate id {id} in a reject-duplicates index"
                )));
            }
            list.ids.push(id);
        }
        lists.insert(cell, list);
    }
    index.lists = lists;
    index.ids = ids;
    index.count = entries;
    Ok(index)
}
