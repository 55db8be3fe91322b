//! Inverted lists of `(id, residual code)` entries and top-k search.

use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::par;
use crate::quantizer::Codebook;
use crate::vecmath::sq_l2;

use super::coarse::{CellId, CoarseQuantizer, HalfDistances};

/// What `add` does with an id that is already stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    Allow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    /// Approximate squared distance `‖q − c − r̂‖²`.
    pub distance: f32,
}

/// Append-ordered entries of one cell; codes are one byte per sub-space.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct CellList {
    pub(crate) ids: Vec<u64>,
    pub(crate) codes: Vec<u8>,
}

impl CellList {
    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) coarse: CoarseQuantizer,
    pub(crate) residual: Codebook,
    pub(crate) policy: DuplicatePolicy,
    pub(crate) lists: BTreeMap<CellId, CellList>,
    pub(crate) ids: HashSet<u64>,
    pub(crate) count: usize,
}

/// Above this many non-empty cells, probing walks the sorted half lists
/// instead of scoring every non-empty cell.
const DIRECT_SCORING_LIMIT: usize = 1 << 16;

/// Heap entry ordered by `(distance, id)`; the top is the worst kept hit.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked(f32, u64);

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` smallest `(distance, id)` pairs seen.
struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn push(&mut self, distance: f32, id: u64) {
        let r = Ranked(distance, id);
        if self.heap.len() < self.k {
            self.heap.push(r);
        } else if let Some(top) = self.heap.peek() {
            if r < *top {
                self.heap.pop();
                self.heap.push(r);
            }
        }
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| Neighbor {
                id: r.1,
                distance: r.0,
            })
            .collect()
    }
}

impl InvertedIndex {
    pub fn new(
        coarse: CoarseQuantizer,
        residual: Codebook,
        policy: DuplicatePolicy,
    ) -> Result<Self> {
        if residual.dim() != coarse.dim() {
            return Err(Error::invalid(format!(
                "residual codebook has {} dimensions, coarse quantizer {}",
                residual.dim(),
                coarse.dim()
            )));
        }
        if residual.sub_quantizers() % 2 != 0 {
            return Err(Error::invalid(format!(
                "residual sub-quantizer count m={} must be even so sub-spaces align with the coarse halves",
                residual.sub_quantizers()
            )));
        }
        if residual.bits() > 8 {
            return Err(Error::invalid(
                "residual codes are stored as one byte per sub-space",
            ));
        }
        Ok(Self {
            coarse,
            residual,
            policy,
            lists: BTreeMap::new(),
            ids: HashSet::new(),
            count: 0,
        })
    }

    pub fn coarse(&self) -> &CoarseQuantizer {
        &self.coarse
    }

    pub fn residual(&self) -> &Codebook {
        &self.residual
    }

    pub fn policy(&self) -> DuplicatePolicy {
        self.policy
    }

    pub fn dim(&self) -> usize {
        self.coarse.dim()
    }

    /// Bytes per stored code.
    pub fn code_len(&self) -> usize {
        self.residual.sub_quantizers()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn non_empty_cells(&self) -> usize {
        self.lists.len()
    }

    pub fn cell_len(&self, cell: CellId) -> usize {
        self.lists.get(&cell).map_or(0, CellList::len)
    }

    /// Non-empty cells with their list lengths, in cell order.
    pub fn cell_sizes(&self) -> impl Iterator<Item = (CellId, usize)> + '_ {
        self.lists.iter().map(|(c, l)| (*c, l.len()))
    }

    /// Entries of `cell` in insertion order.
    pub fn entries(&self, cell: CellId) -> impl Iterator<Item = (u64, &[u8])> + '_ {
        let m = self.code_len();
        self.lists
            .get(&cell)
            .into_iter()
            .flat_map(move |l| l.ids.iter().copied().zip(l.codes.chunks_exact(m)))
    }

    pub fn contains(&self, id: u64) -> bool {
        self.ids.contains(&id)
    }

    /// Cell and residual code for an index-form vector.
    pub fn encode(&self, v: &[f32]) -> Result<(CellId, Vec<u8>)> {
        let cell = self.coarse.assign(v)?;
        let centre = self.coarse.centroid(cell);
        let residual: Vec<f32> = v.iter().zip(&centre).map(|(x, c)| x - c).collect();
        let code = self.residual.encode(&residual)?;
        Ok((cell, code.0.iter().map(|&c| c as u8).collect()))
    }

    fn append(&mut self, id: u64, cell: CellId, code: &[u8]) -> Result<()> {
        if !self.ids.insert(id) && self.policy == DuplicatePolicy::Reject {
            return Err(Error::DuplicateId(id));
        }
        let list = self.lists.entry(cell).or_default();
        list.ids.push(id);
        list.codes.extend_from_slice(code);
        self.count += 1;
        Ok(())
    }

    pub fn add(&mut self, id: u64, v: &[f32]) -> Result<()> {
        if self.policy == DuplicatePolicy::Reject && self.ids.contains(&id) {
            return Err(Error::DuplicateId(id));
        }
        let (cell, code) = self.encode(v)?;
        self.append(id, cell, &code)
    }

    /// Encodes rows in parallel and appends them in input order. Nothing is
    /// added if any id would be rejected.
    pub fn add_batch(&mut self, ids: &[u64], data: &[f32]) -> Result<()> {
        let dim = self.dim();
        if data.len() != ids.len() * dim {
            return Err(Error::invalid(format!(
                "{} ids but {} values (dimension {dim})",
                ids.len(),
                data.len()
            )));
        }
        if self.policy == DuplicatePolicy::Reject {
            let mut seen = HashSet::with_capacity(ids.len());
            for &id in ids {
                if self.ids.contains(&id) || !seen.insert(id) {
                    return Err(Error::DuplicateId(id));
                }
            }
        }
        let encoded = par::map_rows(data, dim, |row| self.encode(row));
        for (&id, e) in ids.iter().zip(encoded) {
            let (cell, code) = e?;
            self.append(id, cell, &code)?;
        }
        Ok(())
    }

    /// The `nprobe` non-empty cells with the smallest summed half distances
    /// (ties by cell id). Requests beyond the number of non-empty cells return
    /// all of them.
    pub fn probe_cells(&self, q: &[f32], nprobe: usize) -> Result<Vec<CellId>> {
        let halves = self.coarse.half_distances(q)?;
        if nprobe as u64 > self.coarse.total_cells() {
            log::warn!(
                "nprobe {nprobe} exceeds the {} coarse cells; clamping",
                self.coarse.total_cells()
            );
        }
        Ok(self.probe_with(&halves, nprobe))
    }

    fn probe_with(&self, halves: &HalfDistances, nprobe: usize) -> Vec<CellId> {
        let n = nprobe.min(self.lists.len());
        if n == 0 {
            return Vec::new();
        }
        if self.lists.len() <= DIRECT_SCORING_LIMIT.max(16 * n) {
            self.probe_direct(halves, n)
        } else {
            self.probe_traversal(halves, n)
        }
    }

    fn probe_direct(&self, halves: &HalfDistances, n: usize) -> Vec<CellId> {
        let mut scored: Vec<(f32, CellId)> = self
            .lists
            .keys()
            .map(|&c| {
                let (a, b) = self.coarse.split(c);
                (halves.a[a] + halves.b[b], c)
            })
            .collect();
        let cmp = |x: &(f32, CellId), y: &(f32, CellId)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, cmp);
            scored.truncate(n);
        }
        scored.sort_by(cmp);
        scored.into_iter().map(|s| s.1).collect()
    }

    fn probe_traversal(&self, halves: &HalfDistances, n: usize) -> Vec<CellId> {
        self.coarse
            .traverse(halves, n, |c| self.lists.contains_key(&c))
            .into_iter()
            .map(|s| s.0)
            .collect()
    }

    /// Top-`k` approximate neighbours of an index-form query over the
    /// `nprobe` nearest non-empty cells, ascending by distance then id.
    pub fn search(&self, q: &[f32], k: usize, nprobe: usize) -> Result<Vec<Neighbor>> {
        let halves = self.coarse.half_distances(q)?;
        let cells = self.probe_with(&halves, nprobe);
        if k == 0 || cells.is_empty() {
            return Ok(Vec::new());
        }
        let m = self.code_len();
        let half_m = m / 2;
        let h = self.dim() / 2;
        let ksub = self.residual.k();
        let dsub = self.residual.dims_per_sub();
        // residual rows depend only on q_half − c_half, so cache them per
        // sub-centroid of each half
        let mut cache: [HashMap<usize, Vec<f32>>; 2] = [HashMap::new(), HashMap::new()];
        let mut top = TopK::new(k);
        let mut best: HashMap<u64, f32> = HashMap::new();
        let cb = self.coarse.codebook();
        for &cell in &cells {
            let (a, b) = self.coarse.split(cell);
            for (half, idx) in [(0usize, a), (1usize, b)] {
                cache[half].entry(idx).or_insert_with(|| {
                    let centre = cb.centroid(half, idx);
                    let shifted: Vec<f32> = q[half * h..(half + 1) * h]
                        .iter()
                        .zip(centre)
                        .map(|(x, c)| x - c)
                        .collect();
                    let mut rows = Vec::with_capacity(half_m * ksub);
                    for s in 0..half_m {
                        let qs = &shifted[s * dsub..(s + 1) * dsub];
                        let sub = self.residual.sub_codebook(half * half_m + s);
                        rows.extend(sub.chunks_exact(dsub).map(|r| sq_l2(qs, r)));
                    }
                    rows
                });
            }
            let (ta, tb) = (&cache[0][&a], &cache[1][&b]);
            let list = &self.lists[&cell];
            for (id, code) in list.ids.iter().zip(list.codes.chunks_exact(m)) {
                let mut acc = 0f32;
                for (s, &c) in code[..half_m].iter().enumerate() {
                    acc += ta[s * ksub + c as usize];
                }
                for (s, &c) in code[half_m..].iter().enumerate() {
                    acc += tb[s * ksub + c as usize];
                }
                match self.policy {
                    DuplicatePolicy::Reject => top.push(acc, *id),
                    DuplicatePolicy::Allow => {
                        let e = best.entry(*id).or_insert(acc);
                        if acc < *e {
                            *e = acc;
                        }
                    }
                }
            }
        }
        for (id, d) in best {
            top.push(d, id);
        }
        Ok(top.into_sorted())
    }

    /// Runs `search` for each row of `queries` in parallel.
    pub fn search_batch(
        &self,
        queries: &[f32],
        k: usize,
        nprobe: usize,
    ) -> Result<Vec<Vec<Neighbor>>> {
        if queries.len() % self.dim() != 0 {
            return Err(Error::invalid(
                "query batch is not rows of the index dimension",
            ));
        }
        par::map_rows(queries, self.dim(), |q| self.search(q, k, nprobe))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::pq_train;
    use rand::Rng;

    const D: usize = 8;

    fn toy(seed: u64, n: usize) -> (InvertedIndex, Vec<f32>) {
        let mut rng = crate::seed::rng(seed);
        let data: Vec<f32> = (0..D * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coarse = CoarseQuantizer::train(&data, D, 3, 8, seed).unwrap();
        let resid: Vec<f32> = data
            .chunks_exact(D)
            .flat_map(|v| {
                let c = coarse.centroid(coarse.assign(v).unwrap());
                v.iter().zip(c).map(|(x, c)| x - c).collect::<Vec<_>>()
            })
            .collect();
        let residual = pq_train(&resid, D, 4, 4, 8, seed + 1).unwrap().codebook;
        let mut index = InvertedIndex::new(coarse, residual, DuplicatePolicy::Reject).unwrap();
        let ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + 1).collect();
        index.add_batch(&ids, &data).unwrap();
        (index, data)
    }

    /// Every stored entry scored with a full-vector ADC table.
    fn linear_scan(index: &InvertedIndex, q: &[f32], k: usize) -> Vec<Neighbor> {
        let mut all = Vec::new();
        for (cell, _) in index.cell_sizes() {
            let centre = index.coarse().centroid(cell);
            let shifted: Vec<f32> = q.iter().zip(&centre).map(|(x, c)| x - c).collect();
            let table = index.residual().adc_table(&shifted).unwrap();
            for (id, code) in index.entries(cell) {
                all.push(Neighbor {
                    id,
                    distance: table.distance(code.iter().map(|&c| c as usize)),
                });
            }
        }
        all.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.id.cmp(&y.id)));
        all.truncate(k);
        all
    }

    #[test]
    fn list_lengths_sum_to_added_count() {
        let (index, _) = toy(1, 700);
        assert_eq!(index.cell_sizes().map(|c| c.1).sum::<usize>(), 700);
        assert_eq!(index.len(), 700);
    }

    #[test]
    fn full_probe_equals_linear_scan() {
        let (index, data) = toy(2, 1500);
        let all = index.non_empty_cells();
        for q in data.chunks_exact(D).step_by(37) {
            let got = index.search(q, 20, all).unwrap();
            assert_eq!(got, linear_scan(&index, q, 20));
            assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }

    #[test]
    fn probing_every_cell_covers_all_entries() {
        let (index, data) = toy(3, 500);
        let got = index
            .search(&data[..D], 10_000, index.non_empty_cells())
            .unwrap();
        assert_eq!(got.len(), 500);
        let probed = index
            .probe_cells(&data[..D], index.non_empty_cells())
            .unwrap();
        assert_eq!(
            probed.iter().map(|&c| index.cell_len(c)).sum::<usize>(),
            500
        );
    }

    #[test]
    fn centroid_vector_has_near_zero_residual() {
        let (mut index, _) = toy(4, 300);
        let v = index.coarse().centroid(9);
        let (cell, code) = index.encode(&v).unwrap();
        assert_eq!(cell, 9);
        // the residual is exactly zero, so the code is the codebook's best
        // approximation of the origin in every sub-space
        let best_zero = index.residual().encode(&[0.0; D]).unwrap();
        assert_eq!(
            code.iter().map(|&c| c as u16).collect::<Vec<_>>(),
            best_zero.0
        );
        let cb = index.residual();
        let rec = cb.decode(&best_zero).unwrap();
        let floor: f32 = (0..cb.sub_quantizers())
            .map(|s| {
                (0..cb.k())
                    .map(|c| sq_l2(cb.centroid(s, c), &[0.0; 2]))
                    .fold(f32::INFINITY, f32::min)
            })
            .sum();
        assert!((sq_l2(&rec, &[0.0; D]) - floor).abs() < 1e-6);
        index.add(10_000, &v).unwrap();
        assert!(matches!(
            index.add(10_000, &v),
            Err(Error::DuplicateId(10_000))
        ));
    }

    #[test]
    fn duplicate_ids_in_batch_rejected_atomically() {
        let (mut index, data) = toy(5, 100);
        let before = index.len();
        let err = index.add_batch(&[5000, 5001, 5000], &data[..3 * D]);
        assert!(matches!(err, Err(Error::DuplicateId(5000))));
        assert_eq!(index.len(), before);
    }

    #[test]
    fn allow_policy_keeps_best_hit_per_id() {
        let (index, data) = toy(6, 50);
        let mut allow = InvertedIndex::new(
            index.coarse.clone(),
            index.residual.clone(),
            DuplicatePolicy::Allow,
        )
        .unwrap();
        allow.add(7, &data[..D]).unwrap();
        allow.add(7, &data[D..2 * D]).unwrap();
        let hits = allow.search(&data[..D], 5, 64).unwrap();
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn nprobe_one_is_nearest_non_empty_cell() {
        let (index, data) = toy(7, 2000);
        for q in data.chunks_exact(D).take(50) {
            // the query's own cell is non-empty because it was added
            assert_eq!(
                index.probe_cells(q, 1).unwrap(),
                vec![index.coarse().assign(q).unwrap()]
            );
        }
    }

    #[test]
    fn k_beyond_count_returns_everything_and_empty_probe_is_empty() {
        let (index, data) = toy(8, 40);
        assert_eq!(index.search(&data[..D], 1000, 1 << 20).unwrap().len(), 40);
        assert!(index.search(&data[..D], 10, 0).unwrap().is_empty());
        let empty = InvertedIndex::new(
            index.coarse.clone(),
            index.residual.clone(),
            DuplicatePolicy::Reject,
        )
        .unwrap();
        assert!(empty.search(&data[..D], 10, 10).unwrap().is_empty());
    }

    #[test]
    fn probe_routes_agree() {
        let (index, data) = toy(10, 120);
        assert!(index.non_empty_cells() < 64);
        for q in data.chunks_exact(D).take(40) {
            let halves = index.coarse().half_distances(q).unwrap();
            for n in [1, 3, 10, index.non_empty_cells()] {
                assert_eq!(
                    index.probe_direct(&halves, n),
                    index.probe_traversal(&halves, n)
                );
            }
        }
    }

    #[test]
    fn odd_residual_m_rejected() {
        let (index, data) = toy(9, 64);
        let cb = pq_train(&data, D, 1, 2, 2, 0).unwrap().codebook;
        assert!(InvertedIndex::new(index.coarse.clone(), cb, DuplicatePolicy::Reject).is_err());
    }
}
