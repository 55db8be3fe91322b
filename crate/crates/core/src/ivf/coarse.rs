//! Two-half coarse product quantizer addressing `2^(2·bits)` cells.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::quantizer::{pq_train, Codebook, PqCode};
use crate::vecmath::sq_l2;

/// Cell identifier: `(code_a << bits) | code_b`.
pub type CellId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseQuantizer {
    codebook: Codebook,
}

/// Per-half distances from a query to every sub-centroid, plus each half's
/// centroid indices sorted by distance (ties by index).
#[derive(Debug, Clone)]
pub struct HalfDistances {
    pub a: Vec<f32>,
    pub b: Vec<f32>,
    pub order_a: Vec<u32>,
    pub order_b: Vec<u32>,
}

/// Score-ordered heap key; ties resolved by the lower cell id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored(f32, CellId);

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl CoarseQuantizer {
    pub fn new(codebook: Codebook) -> Result<Self> {
        if codebook.sub_quantizers() != 2 {
            return Err(Error::invalid(format!(
                "coarse quantizer needs exactly 2 sub-quantizers, got {}",
                codebook.sub_quantizers()
            )));
        }
        if codebook.bits() > 14 {
            return Err(Error::invalid("coarse sub-quantizers use at most 14 bits"));
        }
        Ok(Self { codebook })
    }

    pub fn train(data: &[f32], dim: usize, bits: u32, iters: usize, seed: u64) -> Result<Self> {
        Self::new(pq_train(data, dim, 2, bits, iters, seed)?.codebook)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn dim(&self) -> usize {
        self.codebook.dim()
    }

    pub fn bits(&self) -> u32 {
        self.codebook.bits()
    }

    pub fn total_cells(&self) -> u64 {
        1u64 << (2 * self.bits())
    }

    pub fn cell_id(&self, a: usize, b: usize) -> CellId {
        ((a as u32) << self.bits()) | b as u32
    }

    pub fn split(&self, cell: CellId) -> (usize, usize) {
        let mask = (1u32 << self.bits()) - 1;
        ((cell >> self.bits()) as usize, (cell & mask) as usize)
    }

    /// Nearest sub-centroid in each half.
    pub fn assign(&self, v: &[f32]) -> Result<CellId> {
        let code = self.codebook.encode(v)?;
        Ok(self.cell_id(code.0[0] as usize, code.0[1] as usize))
    }

    /// Concatenated sub-centroids of `cell`.
    pub fn centroid(&self, cell: CellId) -> Vec<f32> {
        let (a, b) = self.split(cell);
        self.codebook
            .decode(&PqCode(vec![a as u16, b as u16]))
            .expect("cell ids are built from in-range codes")
    }

    pub fn half_distances(&self, q: &[f32]) -> Result<HalfDistances> {
        if q.len() != self.dim() {
            return Err(Error::invalid(format!(
                "query has {} dimensions, coarse quantizer expects {}",
                q.len(),
                self.dim()
            )));
        }
        let h = self.dim() / 2;
        let dist = |s: usize| -> Vec<f32> {
            self.codebook
                .sub_codebook(s)
                .chunks_exact(h)
                .map(|c| sq_l2(&q[s * h..(s + 1) * h], c))
                .collect()
        };
        let order = |d: &[f32]| -> Vec<u32> {
            let mut o: Vec<u32> = (0..d.len() as u32).collect();
            o.sort_by(|&x, &y| d[x as usize].total_cmp(&d[y as usize]).then(x.cmp(&y)));
            o
        };
        let a = dist(0);
        let b = dist(1);
        let (order_a, order_b) = (order(&a), order(&b));
        Ok(HalfDistances {
            a,
            b,
            order_a,
            order_b,
        })
    }

    /// Cells in increasing order of `‖q_a − c_a‖² + ‖q_b − c_b‖²` (ties by
    /// lower cell id), visited through the two sorted half lists. `accept`
    /// filters cells; enumeration stops once `n` cells have been accepted.
    pub fn traverse(
        &self,
        halves: &HalfDistances,
        n: usize,
        mut accept: impl FnMut(CellId) -> bool,
    ) -> Vec<(CellId, f32)> {
        if n == 0 {
            return Vec::new();
        }
        let k = halves.a.len();
        let score = |i: usize, j: usize| -> Scored {
            let (a, b) = (halves.order_a[i] as usize, halves.order_b[j] as usize);
            Scored(halves.a[a] + halves.b[b], self.cell_id(a, b))
        };
        let mut heap = BinaryHeap::new();
        let mut seen = HashSet::new();
        heap.push(Reverse((score(0, 0), 0usize, 0usize)));
        seen.insert((0usize, 0usize));
        let mut out: Vec<(CellId, f32)> = Vec::new();
        let mut boundary: Option<f32> = None;
        while let Some(Reverse((s, i, j))) = heap.pop() {
            if let Some(bound) = boundary {
                if s.0 > bound {
                    break;
                }
            }
            if accept(s.1) {
                out.push((s.1, s.0));
                if out.len() == n && boundary.is_none() {
                    // keep draining exact ties so the cut is by cell id
                    boundary = Some(s.0);
                }
            }
            for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                if ni < k && nj < k && seen.insert((ni, nj)) {
                    heap.push(Reverse((score(ni, nj), ni, nj)));
                }
            }
        }
        out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        out.truncate(n);
        out
    }

    /// The `nprobe` best cells over the whole cell space. `nprobe` above the
    /// number of cells is clamped with a warning.
    pub fn probe(&self, q: &[f32], nprobe: usize) -> Result<Vec<CellId>> {
        let halves = self.half_distances(q)?;
        let total = self.total_cells();
        let n = if nprobe as u64 > total {
            log::warn!("nprobe {nprobe} exceeds the {total} coarse cells; clamping");
            total as usize
        } else {
            nprobe
        };
        Ok(self
            .traverse(&halves, n, |_| true)
            .into_iter()
            .map(|c| c.0)
            .collect())
    }
}
