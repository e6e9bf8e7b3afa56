//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashSet;

use migsim::kernels::{ChaseList, CsrMatrix, Permutation};
use migsim::machine::{GlobalAddress, Machine, NULL_POINTER};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense five-point stencil on an `n × n` grid, straight from its definition.
pub fn dense_laplacian(n: usize) -> Vec<Vec<i64>> {
    let size = n * n;
    let mut a = vec![vec![0i64; size]; size];
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            a[r][r] = 4;
            let neighbors = [
                (i as isize - 1, j as isize),
                (i as isize + 1, j as isize),
                (i as isize, j as isize - 1),
                (i as isize, j as isize + 1),
            ];
            for (ni, nj) in neighbors {
                if (0..n as isize).contains(&ni) && (0..n as isize).contains(&nj) {
                    a[r][ni as usize * n + nj as usize] = -1;
                }
            }
        }
    }
    a
}

pub fn dense_of(a: &CsrMatrix) -> Vec<Vec<i64>> {
    let mut d = vec![vec![0i64; a.n_cols]; a.n_rows];
    for (r, row) in d.iter_mut().enumerate() {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            row[a.col_idx[k]] += a.values[k];
        }
    }
    d
}

pub fn dense_matvec(a: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    a.iter().map(|row| row.iter().zip(x).map(|(v, xi)| v * xi).sum()).collect()
}

pub fn random_csr(rng: &mut ChaCha8Rng) -> (Vec<Vec<i64>>, CsrMatrix) {
    let rows = rng.gen_range(1..=32);
    let cols = rng.gen_range(1..=32);
    let density: f64 = rng.gen_range(0.0..0.5);
    let mut dense = vec![vec![0i64; cols]; rows];
    let mut triplets = Vec::new();
    for (r, row) in dense.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            if rng.gen_bool(density) {
                let v = rng.gen_range(-4..=4);
                *slot = v;
                triplets.push((r, c, v));
            }
        }
    }
    (dense, CsrMatrix::from_triplets(rows, cols, triplets).unwrap())
}

/// Follows the stored pointers from each head, returning the payloads seen.
pub fn walk(m: &Machine, list: &ChaseList) -> Vec<Vec<u64>> {
    list.heads
        .iter()
        .map(|&h| {
            let mut out = Vec::new();
            let mut cur = Some(h);
            while let Some(a) = cur {
                out.push(m.read(a) as u64);
                let next = m.read(a.offset(1));
                cur = if next == NULL_POINTER { None } else { GlobalAddress::from_word(next) };
                assert!(out.len() as u64 <= list.n_elements, "cycle in chain");
            }
            out
        })
        .collect()
}

pub fn check_invariants(m: &Machine, list: &ChaseList) {
    let b = list.block_size;
    let chain_len = list.chain_len();
    let chains = walk(m, list);
    let visited: Vec<u64> = chains.iter().flatten().copied().collect();
    assert_eq!(visited, list.order, "pointers disagree with the recorded order");

    let ids: HashSet<u64> = visited.iter().copied().collect();
    assert_eq!(ids.len() as u64, list.n_elements);
    assert!(visited.iter().all(|&e| e < list.n_elements));

    for (t, chain) in chains.iter().enumerate() {
        assert_eq!(chain.len() as u64, chain_len);
        let lo = t as u64 * chain_len;
        assert!(chain.iter().all(|&e| (lo..lo + chain_len).contains(&e)));
        for (pos, block) in chain.chunks(b as usize).enumerate() {
            let base = block[0] / b * b;
            // each visited block is one whole storage block
            let mut sorted = block.to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (base..base + b).collect::<Vec<_>>());
            let home = list.nodelet_of_element(base);
            assert!(block.iter().all(|&e| list.nodelet_of_element(e) == home));
            let in_place = base == lo + pos as u64 * b;
            let ordered_within = block.windows(2).all(|w| w[1] == w[0] + 1);
            match list.permutation {
                Permutation::Ordered => assert!(in_place && ordered_within),
                Permutation::IntraBlockShuffle => assert!(in_place),
                Permutation::BlockShuffle => assert!(ordered_within),
                Permutation::FullBlockShuffle => {}
            }
        }
    }
}
