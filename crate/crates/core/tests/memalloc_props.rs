use std::collections::HashSet;

use migsim::machine::{Machine, MachineConfig};
use migsim::memalloc::{alloc_1d_striped, alloc_2d_rows, alloc_local, alloc_replicated, alloc_striped, AllocError};
use proptest::prelude::*;

fn machine(nodes: usize, per_node: usize) -> Machine {
    Machine::new(MachineConfig {
        nodes,
        nodelets_per_node: per_node,
        ..MachineConfig::default()
    })
    .unwrap()
}

#[test]
fn striped_examples() {
    let mut m = machine(1, 8);
    let a = alloc_1d_striped(&mut m, 32).unwrap();
    assert_eq!(a.nodelet_of(0, 0), 0);
    assert_eq!(a.nodelet_of(7, 0), 7);
    assert_eq!(a.nodelet_of(8, 0), 0);

    let mut m = machine(8, 8);
    let a = alloc_1d_striped(&mut m, 128).unwrap();
    assert_eq!(a.nodelet_of(63, 0), 63);

    let mut m = machine(1, 1);
    let a = alloc_1d_striped(&mut m, 100).unwrap();
    assert!((0..100).all(|i| a.nodelet_of(i, 0) == 0));
}

#[test]
fn local_allocations_do_not_overlap() {
    let mut m = machine(1, 8);
    let a = alloc_local(&mut m, 0, 1024).unwrap();
    assert_eq!(a.resolve(37, None).unwrap().nodelet_id, 0);
    let b = alloc_local(&mut m, 0, 16).unwrap();
    let a_words: HashSet<_> = (0..1024).map(|i| a.resolve(i, None).unwrap()).collect();
    assert!((0..16).all(|i| !a_words.contains(&b.resolve(i, None).unwrap())));
    let c = alloc_local(&mut m, 5, 1).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.resolve(0, None).unwrap().nodelet_id, 5);
    assert_eq!(
        alloc_local(&mut m, 8, 1).unwrap_err(),
        AllocError::BadNodelet { nodelet: 8, total: 8 }
    );
}

#[test]
fn rows_example_and_single_row() {
    let mut m = machine(1, 2);
    let a = alloc_2d_rows(&mut m, &[3, 2, 4]).unwrap();
    let owner = |r: usize| a.resolve_row(r, 0).unwrap().nodelet_id;
    assert_eq!((owner(0), owner(1), owner(2)), (0, 1, 0));

    let mut m = machine(1, 8);
    let a = alloc_2d_rows(&mut m, &[5]).unwrap();
    assert!((0..5).all(|i| a.nodelet_of(i, 0) == 0));
}

#[test]
fn replicated_copies() {
    let mut m = machine(1, 8);
    let a = alloc_replicated(&mut m, 200).unwrap();
    assert_eq!(a.resolve(100, Some(3)).unwrap().nodelet_id, 3);
    assert_eq!(a.resolve(100, None).unwrap_err(), AllocError::MissingHome);
    a.write_all(&mut m, 7, 42).unwrap();
    for h in 0..8 {
        assert_eq!(m.read(a.resolve(7, Some(h)).unwrap()), 42);
    }

    let mut m = machine(1, 1);
    let r = alloc_replicated(&mut m, 4).unwrap();
    assert!((0..4).all(|i| r.nodelet_of(i, 0) == 0));
}

#[test]
fn bounds_and_home_errors() {
    let mut m = machine(1, 4);
    let a = alloc_1d_striped(&mut m, 10).unwrap();
    assert_eq!(a.resolve(10, None).unwrap_err(), AllocError::OutOfBounds { index: 10, len: 10 });
    assert_eq!(a.resolve(0, Some(1)).unwrap_err(), AllocError::UnexpectedHome);
    assert_eq!(alloc_striped(&mut m, 10, 0).unwrap_err(), AllocError::ZeroStripe);
}

#[test]
fn capacity_cap_is_enforced() {
    let mut m = Machine::new(MachineConfig {
        nodes: 1,
        nodelets_per_node: 2,
        nodelet_capacity_words: Some(10),
        ..MachineConfig::default()
    })
    .unwrap();
    alloc_local(&mut m, 0, 8).unwrap();
    assert!(matches!(
        alloc_local(&mut m, 0, 3),
        Err(AllocError::CapacityExceeded { nodelet: 0, requested: 3, available: 2 })
    ));
    alloc_local(&mut m, 1, 10).unwrap();
}

proptest! {
    #[test]
    fn striped_partition_is_balanced(nodelets in 1usize..=16, words in 0u64..2000) {
        let mut m = machine(1, nodelets);
        let a = alloc_1d_striped(&mut m, words).unwrap();
        let n = nodelets as u64;
        let mut counts = vec![0u64; nodelets];
        for i in 0..words {
            let nd = a.nodelet_of(i, 0);
            prop_assert_eq!(nd as u64, i % n);
            counts[nd] += 1;
        }
        prop_assert_eq!(&counts, &a.words_per_nodelet());
        for c in counts {
            prop_assert!(c == words / n || c == words.div_ceil(n));
        }
    }

    #[test]
    fn addresses_are_distinct(nodelets in 1usize..=8, words in 1u64..500, stripe in 1u64..9, local in 0u64..50) {
        let mut m = machine(1, nodelets);
        let pre = alloc_local(&mut m, nodelets - 1, local).unwrap();
        let a = alloc_striped(&mut m, words, stripe).unwrap();
        let mut seen = HashSet::new();
        for i in 0..local {
            seen.insert(pre.resolve(i, None).unwrap());
        }
        for i in 0..words {
            prop_assert!(seen.insert(a.resolve(i, None).unwrap()));
        }
    }

    #[test]
    fn rows_are_co_located(nodelets in 1usize..=8, rows in prop::collection::vec(0u64..12, 1..40)) {
        let mut m = machine(1, nodelets);
        let a = alloc_2d_rows(&mut m, &rows).unwrap();
        let mut index = 0u64;
        for (r, &len) in rows.iter().enumerate() {
            let addrs: Vec<_> = (0..len).map(|k| a.resolve(index + k, None).unwrap()).collect();
            for (k, addr) in addrs.iter().enumerate() {
                prop_assert_eq!(addr.nodelet_id, r % nodelets);
                prop_assert_eq!(*addr, a.resolve_row(r, k as u64).unwrap());
            }
            // consecutive words of a row are contiguous on their nodelet
            for w in addrs.windows(2) {
                prop_assert_eq!(w[1].offset_words, w[0].offset_words + 1);
            }
            index += len;
        }
        prop_assert_eq!(index, a.len());
    }

    #[test]
    fn resolve_is_pure(nodelets in 1usize..=8, words in 1u64..300, probe in 0u64..300) {
        let build = || {
            let mut m = machine(1, nodelets);
            alloc_local(&mut m, 0, 3).unwrap();
            alloc_1d_striped(&mut m, words).unwrap()
        };
        let (a, b) = (build(), build());
        let i = probe % words;
        prop_assert_eq!(a.resolve(i, None).unwrap(), b.resolve(i, None).unwrap());
        prop_assert_eq!(a.resolve(i, None).unwrap(), a.resolve(i, None).unwrap());
    }
}
