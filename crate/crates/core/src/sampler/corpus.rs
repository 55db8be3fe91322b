use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a records file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: u64,
    pub tags: Vec<String>,
}

pub fn read_records(r: impl BufRead) -> Result<Vec<ImageRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(format!("record line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

pub fn write_records(w: &mut impl Write, records: &[ImageRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut *w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Interned tag strings, indexed in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    tags: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tags<S: AsRef<str>>(tags: impl IntoIterator<Item = S>) -> Self {
        let mut v = Self::new();
        for t in tags {
            v.intern(t.as_ref());
        }
        v
    }

    pub fn intern(&mut self, tag: &str) -> u32 {
        if let Some(&i) = self.index.get(tag) {
            return i;
        }
        let i = self.tags.len() as u32;
        self.tags.push(tag.to_string());
        self.index.insert(tag.to_string(), i);
        i
    }

    pub fn get(&self, tag: &str) -> Option<u32> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, i: u32) -> &str {
        &self.tags[i as usize]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Images with interned, de-duplicated tag lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    vocab: Vocabulary,
    ids: Vec<u64>,
    tags: Vec<Vec<u32>>,
}

impl Corpus {
    /// Repeated tags within a record are dropped (first occurrence kept);
    /// repeated image ids are an error.
    pub fn from_records(records: &[ImageRecord]) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for rec in records {
            if !seen.insert(rec.image_id) {
                return Err(Error::invalid(format!("image id {} appears twice", rec.image_id)));
            }
            let tags: Vec<&str> = rec.tags.iter().map(String::as_str).collect();
            c.push(rec.image_id, &tags);
        }
        Ok(c)
    }

    fn push(&mut self, id: u64, tags: &[&str]) {
        let mut interned: Vec<u32> = Vec::with_capacity(tags.len());
        for t in tags {
            let i = self.vocab.intern(t);
            if !interned.contains(&i) {
                interned.push(i);
            }
        }
        self.ids.push(id);
        self.tags.push(interned);
    }

    /// Builds a corpus directly from interned tag lists over `vocab`.
    pub fn from_interned(vocab: Vocabulary, ids: Vec<u64>, tags: Vec<Vec<u32>>) -> Result<Self> {
        if ids.len() != tags.len() {
            return Err(Error::invalid(format!("{} ids for {} tag lists", ids.len(), tags.len())));
        }
        let n = vocab.len() as u32;
        let mut tags = tags;
        for list in &mut tags {
            if list.iter().any(|&t| t >= n) {
                return Err(Error::invalid("tag index outside the vocabulary"));
            }
            let mut seen = Vec::with_capacity(list.len());
            list.retain(|t| {
                let fresh = !seen.contains(t);
                seen.push(*t);
                fresh
            });
        }
        Ok(Self { vocab, ids, tags })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn tags(&self, i: usize) -> &[u32] {
        &self.tags[i]
    }

    pub fn all_tags(&self) -> &[Vec<u32>] {
        &self.tags
    }

    pub fn record(&self, i: usize) -> ImageRecord {
        ImageRecord {
            image_id: self.ids[i],
            tags: self.tags[i].iter().map(|&t| self.vocab.tag(t).to_string()).collect(),
        }
    }

    pub fn frequencies(&self) -> FrequencyTable {
        let mut counts = vec![0u64; self.vocab.len()];
        for list in &self.tags {
            for &t in list {
                counts[t as usize] += 1;
            }
        }
        FrequencyTable { counts, images: self.len() }
    }
}

/// Number of images carrying each tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    images: usize,
}

impl FrequencyTable {
    pub fn new(counts: Vec<u64>, images: usize) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::invalid("every tag needs a positive count"));
        }
        Ok(Self { counts, images })
    }

    pub fn count(&self, tag: u32) -> u64 {
        self.counts[tag as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn total_occurrences(&self) -> u64 {
        self.counts.iter().sum()
    }
}
