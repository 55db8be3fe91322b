use super::Vocabulary;

/// Uniform distribution over an image's distinct in-vocabulary tags.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    /// `(tag index, weight)`, ascending by index; weights are `1/k`.
    pub entries: Vec<(u32, f64)>,
}

impl TargetVector {
    pub fn support(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, tag: u32) -> f64 {
        self.entries.iter().find(|e| e.0 == tag).map_or(0.0, |e| e.1)
    }
}

/// `None` when no tag is in the vocabulary: the record is dropped.
pub fn make_target<S: AsRef<str>>(tags: &[S], vocab: &Vocabulary) -> Option<TargetVector> {
    let mut idx: Vec<u32> = tags.iter().filter_map(|t| vocab.get(t.as_ref())).collect();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return None;
    }
    let w = 1.0 / idx.len() as f64;
    Some(TargetVector { entries: idx.into_iter().map(|t| (t, w)).collect() })
}
