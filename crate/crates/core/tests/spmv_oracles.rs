mod common;

use common::{dense_laplacian, dense_matvec, dense_of, random_csr};
use migsim::kernels::{laplacian_csr, spmv, CsrMatrix, LaplacianSpec, SpmvConfig, SpmvLayout};
use migsim::machine::MachineConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAYOUTS: [SpmvLayout; 3] = [SpmvLayout::Local, SpmvLayout::Striped1D, SpmvLayout::Rows2D];

fn eight_nodelets() -> MachineConfig {
    MachineConfig {
        nodes: 1,
        nodelets_per_node: 8,
        ..MachineConfig::default()
    }
}




#[test]
fn laplacian_matches_stencil_definition() {
    for n in 1..=16 {
        let a = laplacian_csr(LaplacianSpec { n }).unwrap();
        let dense = dense_laplacian(n);
        assert_eq!(dense_of(&a), dense, "n = {n}");
        let brute: usize = dense.iter().flatten().filter(|&&v| v != 0).count();
        assert_eq!(a.nnz(), brute);
        assert_eq!(a.nnz(), 5 * n * n - 4 * n);
        assert!((0..a.n_rows).all(|r| a.row_len(r) <= 5));
    }
}

#[test]
fn two_by_two_with_ones() {
    let a = laplacian_csr(LaplacianSpec { n: 2 }).unwrap();
    for layout in LAYOUTS {
        let r = spmv(&eight_nodelets(), &a, &[1; 4], &SpmvConfig { layout, threads: 4, ..SpmvConfig::default() }).unwrap();
        assert_eq!(r.y, vec![2, 2, 2, 2]);
        assert!(r.verified);
    }
}

#[test]
fn zero_vector_gives_zero() {
    let a = laplacian_csr(LaplacianSpec { n: 5 }).unwrap();
    for layout in LAYOUTS {
        let r = spmv(&eight_nodelets(), &a, &[0; 25], &SpmvConfig { layout, threads: 8, ..SpmvConfig::default() }).unwrap();
        assert!(r.y.iter().all(|&v| v == 0));
    }
}

#[test]
fn laplacians_match_dense_oracle() {
    for n in 1..=8 {
        let a = laplacian_csr(LaplacianSpec { n }).unwrap();
        let x: Vec<i64> = (0..(n * n) as i64).map(|i| (i * 7) % 11 - 5).collect();
        let expected = dense_matvec(&dense_laplacian(n), &x);
        for layout in LAYOUTS {
            for threads in [1, 5, 16] {
                let r = spmv(&eight_nodelets(), &a, &x, &SpmvConfig { layout, threads, ..SpmvConfig::default() }).unwrap();
                assert_eq!(r.y, expected, "n {n} layout {layout} threads {threads}");
                assert!(r.verified);
            }
        }
    }
}


#[test]
fn random_matrices_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let (dense, a) = random_csr(&mut rng);
        a.validate().unwrap();
        let x: Vec<i64> = (0..a.n_cols).map(|_| rng.gen_range(-4..=4)).collect();
        let expected = dense_matvec(&dense, &x);
        for layout in LAYOUTS {
            let threads = 1 + case % 9;
            let r = spmv(&eight_nodelets(), &a, &x, &SpmvConfig { layout, threads, ..SpmvConfig::default() }).unwrap();
            assert_eq!(r.y, expected, "case {case} layout {layout}");
        }
    }
}

#[test]
fn local_layout_touches_one_channel() {
    let a = laplacian_csr(LaplacianSpec { n: 6 }).unwrap();
    let x = vec![1; 36];
    let r = spmv(&eight_nodelets(), &a, &x, &SpmvConfig { layout: SpmvLayout::Local, threads: 8, ..SpmvConfig::default() }).unwrap();
    assert!(r.stats.nodelets[0].channel_busy_cycles > 0);
    assert!(r.stats.nodelets[1..].iter().all(|n| n.channel_busy_cycles == 0));
    assert_eq!(r.stats.total_migrations(), 0);
}

#[test]
fn striped_migrates_more_than_rows() {
    for n in [8, 12] {
        let a = laplacian_csr(LaplacianSpec { n }).unwrap();
        let x = vec![1; n * n];
        let run = |layout| {
            spmv(&eight_nodelets(), &a, &x, &SpmvConfig { layout, threads: 16, ..SpmvConfig::default() })
                .unwrap()
                .stats
                .total_migrations()
        };
        assert!(run(SpmvLayout::Striped1D) > run(SpmvLayout::Rows2D));
    }
}

#[test]
fn matrix_market_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let (_, a) = random_csr(&mut rng);
        let b = CsrMatrix::from_matrix_market(&a.to_matrix_market()).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn host_matvec_matches_dense(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = vec![vec![0i64; cols]; rows];
        let mut t = Vec::new();
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                if rng.gen_bool(0.3) {
                    *slot = rng.gen_range(-4..=4);
                    t.push((r, c, *slot));
                }
            }
        }
        let a = CsrMatrix::from_triplets(rows, cols, t).unwrap();
        let x: Vec<i64> = (0..cols as i64).collect();
        prop_assert_eq!(a.matvec(&x), dense_matvec(&dense, &x));
    }
}
