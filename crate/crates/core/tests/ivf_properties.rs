use rand::seq::SliceRandom;
use rand::Rng;
use wildset_core::dedup::{stage1, Query};
use wildset_core::ivf::{read_index, write_index, CoarseQuantizer, DuplicatePolicy, InvertedIndex, Neighbor};
use wildset_core::quantizer::pq_train;
use wildset_core::seed;
use wildset_core::vecmath::sq_l2;

const D: usize = 32;

/// Clustered data so that cells are unevenly filled, as with real descriptors.
fn clustered(n: usize, s: u64) -> Vec<f32> {
    let mut rng = seed::rng(s);
    let centres: Vec<f32> = (0..40 * D).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .flat_map(|_| {
            let c = rng.random_range(0..40);
            let base = centres[c * D..(c + 1) * D].to_vec();
            base.into_iter().map(|x| x + rng.random_range(-0.3f32..0.3)).collect::<Vec<_>>()
        })
        .collect()
}

fn build(data: &[f32], ids: &[u64], s: u64) -> InvertedIndex {
    let coarse = CoarseQuantizer::train(data, D, 6, 10, s).unwrap();
    let resid: Vec<f32> = data
        .chunks_exact(D)
        .flat_map(|v| {
            let c = coarse.centroid(coarse.assign(v).unwrap());
            v.iter().zip(c).map(|(x, c)| x - c).collect::<Vec<_>>()
        })
        .collect();
    let residual = pq_train(&resid, D, 8, 8, 10, s + 1).unwrap().codebook;
    let mut index = InvertedIndex::new(coarse, residual, DuplicatePolicy::Reject).unwrap();
    index.add_batch(ids, data).unwrap();
    index
}

/// Every entry of the probed cells, scored with a fresh full-vector table,
/// sorted by (distance, id) and truncated.
fn scan(index: &InvertedIndex, q: &[f32], k: usize, nprobe: usize) -> Vec<Neighbor> {
    let mut all = Vec::new();
    for cell in index.probe_cells(q, nprobe).unwrap() {
        let centre = index.coarse().centroid(cell);
        let shifted: Vec<f32> = q.iter().zip(&centre).map(|(x, c)| x - c).collect();
        let t = index.residual().adc_table(&shifted).unwrap();
        for (id, code) in index.entries(cell) {
            all.push(Neighbor { id, distance: t.distance(code.iter().map(|&c| c as usize)) });
        }
    }
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    all.truncate(k);
    all
}

#[test]
fn heap_matches_sort_oracle_at_every_probe_depth() {
    let data = clustered(6000, 1);
    let ids: Vec<u64> = (0..6000).collect();
    let index = build(&data, &ids, 2);
    let queries = clustered(40, 3);
    for q in queries.chunks_exact(D) {
        for nprobe in [1, 4, 32, 256, index.non_empty_cells()] {
            assert_eq!(index.search(q, 50, nprobe).unwrap(), scan(&index, q, 50, nprobe));
        }
    }
}

#[test]
fn probed_cells_match_full_enumeration_over_non_empty_cells() {
    let data = clustered(3000, 4);
    let ids: Vec<u64> = (0..3000).collect();
    let index = build(&data, &ids, 5);
    let cb = index.coarse().codebook();
    for q in clustered(30, 6).chunks_exact(D) {
        let mut all: Vec<(f32, u32)> = index
            .cell_sizes()
            .map(|(cell, _)| {
                let (a, b) = index.coarse().split(cell);
                (sq_l2(&q[..D / 2], cb.centroid(0, a)) + sq_l2(&q[D / 2..], cb.centroid(1, b)), cell)
            })
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for n in [1, 5, 50, all.len()] {
            let want: Vec<u32> = all[..n].iter().map(|x| x.1).collect();
            assert_eq!(index.probe_cells(q, n).unwrap(), want);
        }
    }
}

#[test]
fn full_probe_search_ignores_insertion_order() {
    let data = clustered(4000, 7);
    let ids: Vec<u64> = (0..4000).map(|i| i * 7 + 3).collect();
    let index = build(&data, &ids, 8);
    let mut order: Vec<usize> = (0..4000).collect();
    order.shuffle(&mut seed::rng(9));
    let mut shuffled = InvertedIndex::new(index.coarse().clone(), index.residual().clone(), DuplicatePolicy::Reject).unwrap();
    for &i in &order {
        shuffled.add(ids[i], &data[i * D..(i + 1) * D]).unwrap();
    }
    let all = index.non_empty_cells();
    for q in clustered(30, 10).chunks_exact(D) {
        assert_eq!(index.search(q, 100, all).unwrap(), shuffled.search(q, 100, all).unwrap());
    }
}

#[test]
fn recall_of_full_probe_top_k_never_drops_with_more_cells() {
    let data = clustered(8000, 11);
    let ids: Vec<u64> = (0..8000).collect();
    let index = build(&data, &ids, 12);
    let all = index.non_empty_cells();
    let mut prev = 0.0;
    for nprobe in [1, 2, 4, 8, 16, 64, 256, all] {
        let mut hit = 0usize;
        let mut total = 0usize;
        for q in clustered(100, 13).chunks_exact(D) {
            let truth = index.search(q, 20, all).unwrap();
            let got = index.search(q, 20, nprobe).unwrap();
            hit += truth.iter().filter(|t| got.iter().any(|g| g.id == t.id)).count();
            total += truth.len();
        }
        let recall = hit as f64 / total as f64;
        assert!(recall >= prev, "recall fell from {prev} to {recall} at nprobe {nprobe}");
        prev = recall;
    }
    assert_eq!(prev, 1.0);
}

#[test]
fn stored_vectors_retrieve_themselves() {
    let data = clustered(10_000, 14);
    let ids: Vec<u64> = (0..10_000).collect();
    let index = build(&data, &ids, 15);
    let all = index.non_empty_cells();
    let mut first = 0;
    let mut in_top = 0;
    for i in (0..10_000).step_by(50) {
        let q = &data[i * D..(i + 1) * D];
        let hits = index.search(q, 10, all).unwrap();
        first += usize::from(hits[0].id == i as u64);
        in_top += usize::from(hits.iter().any(|h| h.id == i as u64));
    }
    assert_eq!(in_top, 200);
    assert!(first >= 190, "{first}/200 ranked first");
}

#[test]
fn single_candidate_stage1_matches_search() {
    let data = clustered(2000, 16);
    let ids: Vec<u64> = (0..2000).collect();
    let index = build(&data, &ids, 17);
    let all = index.non_empty_cells();
    let queries: Vec<Query> =
        (0..50).map(|i| Query { id: 100_000 + i, vector: Some(&data[i as usize * D..(i as usize + 1) * D]) }).collect();
    for (q, out) in queries.iter().zip(stage1(&index, &queries, 1, all)) {
        assert_eq!(out.unwrap().candidates, index.search(q.vector.unwrap(), 1, all).unwrap());
    }
}

#[test]
fn file_round_trip_preserves_results() {
    let data = clustered(3000, 18);
    let ids: Vec<u64> = (0..3000).collect();
    let index = build(&data, &ids, 19);
    let mut buf = Vec::new();
    write_index(&mut buf, &index).unwrap();
    let back = read_index(&mut buf.as_slice(), index.coarse(), index.residual()).unwrap();
    let mut again = Vec::new();
    write_index(&mut again, &back).unwrap();
    assert_eq!(buf, again);
    for q in clustered(20, 20).chunks_exact(D) {
        let (a, b) = (index.search(q, 64, 16).unwrap(), back.search(q, 64, 16).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| x.id == y.id && x.distance.to_bits() == y.distance.to_bits()));
    }
}
