//! Materialised epoch lists and their binary form.
//!
//! ```text
//! ids file    "WSE1", version u32, count u64, count × image id u64
//! mask file   "WSM1", version u32, count u64, then per copy:
//!             u16 byte length + bitmask over the image's tag list
//! ```

use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};

use crate::binio;
use crate::error::{Error, Result};
use crate::par;
use crate::seed;

use super::plan::{first_uniform, stochastic_round};
use super::{Corpus, ReplicationPlan, ROUNDING_LABEL, SHUFFLE_LABEL};

const IDS_MAGIC: &[u8; 4] = b"WSE1";
const MASK_MAGIC: &[u8; 4] = b"WSM1";
const VERSION: u32 = 1;

/// One entry of the epoch list: an image and the subset of its tags this
/// copy carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochCopy {
    /// Position of the image in the corpus.
    pub image: u32,
    /// Tags kept, in the image's tag order.
    pub tags: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochList {
    pub copies: Vec<EpochCopy>,
}

impl EpochList {
    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }
}

/// Repeats each image `round(r(I))` times, keeps tag `h` in `round(r(h))` of
/// those copies (chosen uniformly), then shuffles.
///
/// All rounding for an image shares one uniform, so the copy count and the
/// per-tag counts are consistent and the image's highest-factor tag survives
/// in every copy.
pub fn build_epoch_list(corpus: &Corpus, plan: &ReplicationPlan, seed: u64) -> Result<EpochList> {
    if plan.image_factors.len() != corpus.len() {
        return Err(Error::invalid("replication plan was built for a different corpus"));
    }
    if corpus.len() > u32::MAX as usize {
        return Err(Error::invalid("epoch lists address at most 2^32 images"));
    }
    let s = seed::derive(seed, ROUNDING_LABEL);
    let per_image: Vec<Vec<EpochCopy>> = par::map_range(corpus.len(), |i| {
        let mut rng = seed::stream(s, i as u64);
        let u = first_uniform(&mut rng);
        let copies = stochastic_round(plan.image_factors[i], u) as usize;
        let mut kept: Vec<Vec<u32>> = vec![Vec::new(); copies];
        for &t in corpus.tags(i) {
            let k = (stochastic_round(plan.tag_factors[t as usize], u) as usize).min(copies);
            if k == copies {
                kept.iter_mut().for_each(|c| c.push(t));
            } else {
                for c in index::sample(&mut rng, copies, k) {
                    kept[c].push(t);
                }
            }
        }
        kept.into_iter().map(|tags| EpochCopy { image: i as u32, tags }).collect()
    });
    let mut copies: Vec<EpochCopy> = per_image.into_iter().flatten().collect();
    copies.shuffle(&mut seed::rng(seed::derive(seed, SHUFFLE_LABEL)));
    Ok(EpochList { copies })
}

/// Occurrences of each tag across all copies.
pub fn epoch_tag_totals(list: &EpochList, vocab_len: usize) -> Vec<u64> {
    let mut out = vec![0u64; vocab_len];
    for c in &list.copies {
        for &t in &c.tags {
            out[t as usize] += 1;
        }
    }
    out
}

pub fn write_epoch(ids: &mut impl Write, masks: &mut impl Write, list: &EpochList, corpus: &Corpus) -> Result<()> {
    binio::write_magic(ids, IDS_MAGIC)?;
    binio::write_u32(ids, VERSION)?;
    binio::write_u64(ids, list.len() as u64)?;
    binio::write_magic(masks, MASK_MAGIC)?;
    binio::write_u32(masks, VERSION)?;
    binio::write_u64(masks, list.len() as u64)?;
    for c in &list.copies {
        binio::write_u64(ids, corpus.id(c.image as usize))?;
        let tags = corpus.tags(c.image as usize);
        let nbytes = tags.len().div_ceil(8);
        if nbytes > u16::MAX as usize {
            return Err(Error::invalid("an image has too many tags for the mask format"));
        }
        let mut mask = vec![0u8; nbytes];
        for t in &c.tags {
            let pos = tags.iter().position(|x| x == t).ok_or_else(|| Error::invalid("copy carries a foreign tag"))?;
            mask[pos / 8] |= 1 << (pos % 8);
        }
        masks.write_all(&(nbytes as u16).to_le_bytes())?;
        masks.write_all(&mask)?;
    }
    Ok(())
}

pub fn read_epoch(ids: &mut impl Read, masks: &mut impl Read, corpus: &Corpus) -> Result<EpochList> {
    binio::expect_magic(ids, IDS_MAGIC)?;
    binio::expect_magic(masks, MASK_MAGIC)?;
    if binio::read_u32(ids)? != VERSION || binio::read_u32(masks)? != VERSION {
        return Err(Error::format("unsupported epoch file version"));
    }
    let n = binio::read_u64(ids)?;
    if binio::read_u64(masks)? != n {
        return Err(Error::format("epoch id and mask files disagree on length"));
    }
    let position: std::collections::HashMap<u64, u32> =
        corpus.ids().iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
    let mut copies = Vec::new();
    for _ in 0..n {
        let id = binio::read_u64(ids)?;
        let image = *position.get(&id).ok_or_else(|| Error::format(format!("image {id} is not in the corpus")))?;
        let mut len = [0u8; 2];
        masks.read_exact(&mut len)?;
        let mut mask = vec![0u8; u16::from_le_bytes(len) as usize];
        masks.read_exact(&mut mask)?;
        let tags = corpus.tags(image as usize);
        if mask.len() != tags.len().div_ceil(8) {
            return Err(Error::format(format!("mask for image {id} has the wrong length")));
        }
        let kept = tags.iter().enumerate().filter(|(p, _)| mask[p / 8] >> (p % 8) & 1 == 1).map(|(_, &t)| t).collect();
        copies.push(EpochCopy { image, tags: kept });
    }
    Ok(EpochList { copies })
}
