//! Tab-separated tag files.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::{CanonicalMap, TagGroup};

/// Reads `tag TAB count` lines.
pub fn read_counts(r: impl BufRead) -> Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (tag, count) =
            line.split_once('\t').ok_or_else(|| Error::format(format!("line {}: expected tag<TAB>count", n + 1)))?;
        let count = count
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("line {}: count {count:?} is not an integer", n + 1)))?;
        out.push((tag.to_string(), count));
    }
    Ok(out)
}

pub fn write_counts(w: &mut impl Write, counts: &[(String, u64)]) -> Result<()> {
    for (t, c) in counts {
        writeln!(w, "{t}\t{c}")?;
    }
    Ok(())
}

/// One `member TAB canonical TAB group_count TAB senses` line per member,
/// groups in canonical order.
pub fn write_canonical_map(w: &mut impl Write, cmap: &CanonicalMap) -> Result<()> {
    for g in cmap.groups() {
        let senses: Vec<&str> = g.senses.iter().map(String::as_str).collect();
        for m in &g.members {
            writeln!(w, "{m}\t{}\t{}\t{}", g.canonical, g.count, senses.join(","))?;
        }
    }
    Ok(())
}

pub fn read_canonical_map(r: impl BufRead) -> Result<CanonicalMap> {
    let mut groups: Vec<TagGroup> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::format(format!("canonical map line {}: expected 4 fields", n + 1)));
        }
        let count = f[2].parse().map_err(|_| Error::format(format!("canonical map line {}: bad count", n + 1)))?;
        let g = *index.entry(f[1].to_string()).or_insert_with(|| {
            groups.push(TagGroup {
                canonical: f[1].to_string(),
                members: Vec::new(),
                senses: f[3].split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
                count,
            });
            groups.len() - 1
        });
        groups[g].members.push(f[0].to_string());
    }
    CanonicalMap::from_groups(groups).map_err(|e| Error::format(e.to_string()))
}
