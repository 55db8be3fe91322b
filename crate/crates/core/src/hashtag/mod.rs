//! Hashtag vocabulary selection and synonym merging.
//!
//! A hashtag's senses are the synsets its text (or any two-word split of it)
//! maps to in a lexical snapshot. Tags with identical, non-empty sense sets
//! are merged into one group represented by its most frequent member.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};

pub use io::{read_canonical_map, read_counts, write_canonical_map, write_counts};

pub type SynsetSet = BTreeSet<String>;

/// Term → synset ids. Terms are stored lowercased with `_` read as a space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynsetDb {
    terms: HashMap<String, SynsetSet>,
}

fn fold_term(term: &str) -> String {
    term.trim().to_lowercase().replace('_', " ")
}

impl SynsetDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: &str, synsets: impl IntoIterator<Item = impl Into<String>>) {
        self.terms.entry(fold_term(term)).or_default().extend(synsets.into_iter().map(Into::into));
    }

    /// Parses `term TAB synset[,synset...]` lines; blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut db = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (term, ids) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(format!("synset line {}: expected term<TAB>ids", n + 1)))?;
            let ids: Vec<&str> = ids.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if term.trim().is_empty() || ids.is_empty() {
                return Err(Error::format(format!("synset line {}: empty term or id list", n + 1)));
            }
            db.insert(term, ids);
        }
        Ok(db)
    }

    pub fn lookup(&self, term: &str) -> Option<&SynsetSet> {
        self.terms.get(&fold_term(term))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Every synset id in the snapshot.
    pub fn all_synsets(&self) -> SynsetSet {
        self.terms.values().flatten().cloned().collect()
    }
}

/// Strips leading `#` characters and lowercases.
pub fn normalize_tag(tag: &str) -> Result<String> {
    let t = tag.trim().trim_start_matches('#').to_lowercase();
    if t.is_empty() {
        return Err(Error::invalid(format!("hashtag {tag:?} is empty")));
    }
    Ok(t)
}

/// All senses of `tag`: lookups of the tag itself and of every split into
/// two words. Tags that are not ASCII alphanumeric have no senses.
pub fn senses(tag: &str, db: &SynsetDb) -> Result<SynsetSet> {
    let h = normalize_tag(tag)?;
    let mut out = SynsetSet::new();
    if !h.bytes().all(|b| b.is_ascii_alphanumeric()) {
        return Ok(out);
    }
    let mut add = |term: &str| {
        if let Some(s) = db.lookup(term) {
            out.extend(s.iter().cloned());
        }
    };
    add(&h);
    for i in 1..h.len() {
        add(&format!("{} {}", &h[..i], &h[i..]));
    }
    Ok(out)
}

/// `senses(tag) ∩ allowed`.
pub fn synset_match(tag: &str, db: &SynsetDb, allowed: &SynsetSet) -> Result<SynsetSet> {
    Ok(senses(tag, db)?.intersection(allowed).cloned().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagGroup {
    pub canonical: String,
    /// Sorted lexicographically.
    pub members: Vec<String>,
    pub senses: SynsetSet,
    /// Summed frequency of the members.
    pub count: u64,
}

/// Partition of a tag set into synonym groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CanonicalMap {
    groups: Vec<TagGroup>,
    by_tag: HashMap<String, usize>,
}

impl CanonicalMap {
    pub fn from_groups(groups: Vec<TagGroup>) -> Result<Self> {
        let mut by_tag = HashMap::new();
        for (g, group) in groups.iter().enumerate() {
            if !group.members.contains(&group.canonical) {
                return Err(Error::invalid(format!("canonical tag {:?} is not in its group", group.canonical)));
            }
            for m in &group.members {
                if by_tag.insert(m.clone(), g).is_some() {
                    return Err(Error::invalid(format!("tag {m:?} appears in two groups")));
                }
            }
        }
        Ok(Self { groups, by_tag })
    }

    pub fn groups(&self) -> &[TagGroup] {
        &self.groups
    }

    pub fn group_of(&self, tag: &str) -> Option<&TagGroup> {
        self.by_tag.get(tag).map(|&g| &self.groups[g])
    }

    pub fn canonical<'a>(&'a self, tag: &str) -> Option<&'a str> {
        self.group_of(tag).map(|g| g.canonical.as_str())
    }

    pub fn len(&self) -> usize {
        self.by_tag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tag.is_empty()
    }
}

/// Groups `(tag, frequency)` pairs by equal, non-empty sense sets. Tags
/// without senses (including empty ones) stay alone. Repeated tags have their
/// frequencies summed.
pub fn canonical_merge(corpus: &[(String, u64)], db: &SynsetDb) -> CanonicalMap {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for (t, c) in corpus {
        *freq.entry(t.as_str()).or_default() += c;
    }
    let mut by_senses: BTreeMap<SynsetSet, Vec<&str>> = BTreeMap::new();
    let mut groups = Vec::new();
    for (&tag, _) in &freq {
        let s = senses(tag, db).unwrap_or_default();
        if s.is_empty() {
            groups.push(vec![tag]);
        } else {
            by_senses.entry(s).or_default().push(tag);
        }
    }
    let sense_of: HashMap<&str, SynsetSet> =
        by_senses.iter().flat_map(|(s, ts)| ts.iter().map(move |&t| (t, s.clone()))).collect();
    groups.extend(by_senses.into_values());
    let mut out: Vec<TagGroup> = groups
        .into_iter()
        .map(|mut members| {
            members.sort_unstable();
            // most frequent; lexicographically first on ties
            let canonical = *members.iter().max_by(|a, b| freq[**a].cmp(&freq[**b]).then(b.cmp(a))).unwrap();
            TagGroup {
                canonical: canonical.to_string(),
                senses: sense_of.get(canonical).cloned().unwrap_or_default(),
                count: members.iter().map(|m| freq[m]).sum(),
                members: members.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    CanonicalMap::from_groups(out).expect("groups partition distinct tags")
}

/// Tags matching at least one synset of `allowed`, most frequent first (ties
/// lexicographic), optionally truncated to the `top_n` most frequent.
pub fn select_vocab(
    allowed: &SynsetSet,
    corpus: &[(String, u64)],
    db: &SynsetDb,
    top_n: Option<usize>,
) -> Vec<(String, u64)> {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for (t, c) in corpus {
        *freq.entry(t.as_str()).or_default() += c;
    }
    let mut out: Vec<(String, u64)> = freq
        .into_iter()
        .filter(|(t, _)| synset_match(t, db, allowed).is_ok_and(|s| !s.is_empty()))
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(n) = top_n {
        out.truncate(n);
    }
    out
}

/// Maps image tags to canonical forms and keeps those whose group contains
/// a selected tag.
#[derive(Debug, Clone)]
pub struct Relabeler<'a> {
    cmap: &'a CanonicalMap,
    allowed: HashSet<String>,
}

impl<'a> Relabeler<'a> {
    pub fn new<S: AsRef<str>>(cmap: &'a CanonicalMap, selected: impl IntoIterator<Item = S>) -> Self {
        let allowed = selected
            .into_iter()
            .map(|s| {
                let s = s.as_ref();
                cmap.canonical(s).unwrap_or(s).to_string()
            })
            .collect();
        Self { cmap, allowed }
    }

    /// Canonical labels in first-seen order without repeats; may be empty.
    pub fn relabel<S: AsRef<str>>(&self, tags: &[S]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in tags {
            let Ok(t) = normalize_tag(t.as_ref()) else { continue };
            let c = self.cmap.canonical(&t).unwrap_or(&t);
            if self.allowed.contains(c) && !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        }
        out
    }
}
