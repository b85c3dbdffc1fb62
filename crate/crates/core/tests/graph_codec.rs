mod common;

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use rscache::codec::{self, CacheState, DemandVector, Library};
use rscache::rsgraph::{
    construct_binomial, construct_mn, scheme_params, validate_rs, Edge, RsGraph, Violation,
};

use common::{all_subsets, choose};

type Set = BTreeSet<u32>;

/// Edge set of the binomial family straight from its definition:
/// `(A, B)` is an edge iff `A` and `B` are disjoint.
fn binomial_edges_oracle(n: u32, a: u32) -> BTreeSet<(Vec<u32>, Vec<u32>)> {
    let mut out = BTreeSet::new();
    for p in all_subsets(n, a) {
        for u in all_subsets(n, 2) {
            if p.iter().all(|x| !u.contains(x)) {
                out.insert((p.clone(), u));
            }
        }
    }
    out
}

/// `(A, k)` is an edge iff `k` is not in `A`.
fn mn_edges_oracle(k: u32, s: u32) -> BTreeSet<(Vec<u32>, Vec<u32>)> {
    let mut out = BTreeSet::new();
    for p in all_subsets(k, s) {
        for u in 1..=k {
            if !p.contains(&u) {
                out.insert((p.clone(), vec![u]));
            }
        }
    }
    out
}

fn labelled_edges(g: &RsGraph) -> BTreeSet<(Vec<u32>, Vec<u32>)> {
    let labels = g.labels().expect("constructed graphs carry labels");
    g.edges()
        .map(|e| {
            (
                labels.packets[e.packet].clone(),
                labels.users[e.user].clone(),
            )
        })
        .collect()
}

#[test]
fn binomial_matches_enumeration() {
    for (n, a) in [(4, 1), (5, 1), (5, 2), (6, 2), (7, 3)] {
        let g = construct_binomial(n, a).unwrap();
        let oracle = binomial_edges_oracle(n, a);
        assert_eq!(labelled_edges(&g), oracle, "n={n} a={a}");
        assert_eq!(g.num_edge_slots(), oracle.len());
        let (n64, a64) = (u64::from(n), u64::from(a));
        assert_eq!(g.num_packets() as u64, choose(n64, a64));
        assert_eq!(g.num_users() as u64, choose(n64, 2));
        assert_eq!(g.num_matchings() as u64, choose(n64, a64 + 2));
        // every matching is the set of splits of one (a+2)-subset
        let labels = g.labels().unwrap();
        for m in g.matchings() {
            let union: Set = m
                .iter()
                .flat_map(|e| labels.packets[e.packet].iter().chain(&labels.users[e.user]))
                .copied()
                .collect();
            assert_eq!(union.len() as u32, a + 2);
            assert_eq!(m.len() as u64, choose(a64 + 2, 2));
        }
    }
}

#[test]
fn binomial_small_counts() {
    let g = construct_binomial(4, 1).unwrap();
    assert_eq!(
        (g.num_packets(), g.num_users(), g.num_matchings()),
        (4, 6, 4)
    );
    assert!(g.matchings().iter().all(|m| m.len() == 3));
    assert_eq!(g.num_edge_slots(), 12);

    let g = construct_binomial(6, 2).unwrap();
    assert_eq!(
        (g.num_packets(), g.num_users(), g.num_matchings()),
        (15, 15, 15)
    );
    assert!(g.matchings().iter().all(|m| m.len() == 6));
    assert_eq!(g.num_edge_slots(), 90);
    let p = scheme_params(&g).unwrap();
    assert_eq!(p.memory_ratio, Ratio::new(3, 5));
    assert_eq!(p.rate, Ratio::from_integer(1));

    assert!(construct_binomial(3, 2).is_err());
}

#[test]
fn mn_matches_enumeration() {
    for (k, s) in [(2, 1), (4, 2), (5, 2), (6, 3)] {
        let g = construct_mn(k, s).unwrap();
        assert_eq!(labelled_edges(&g), mn_edges_oracle(k, s), "K={k} s={s}");
        let (k64, s64) = (u64::from(k), u64::from(s));
        let p = scheme_params(&g).unwrap();
        assert_eq!(p.rate, Ratio::new(choose(k64, s64 + 1), choose(k64, s64)));
        assert_eq!(p.rate, Ratio::new(k64 - s64, s64 + 1));
        assert_eq!(p.memory_ratio, Ratio::new(s64, k64));
    }
}

#[test]
fn mn_small_cases() {
    let g = construct_mn(4, 2).unwrap();
    assert_eq!((g.num_packets(), g.num_matchings()), (6, 4));
    let p = scheme_params(&g).unwrap();
    assert_eq!(p.rate, Ratio::new(2, 3));
    assert_eq!(p.memory_ratio, Ratio::new(1, 2));

    let g = construct_mn(2, 1).unwrap();
    assert_eq!((g.num_packets(), g.num_matchings()), (2, 1));
    let labels = g.labels().unwrap();
    let m: BTreeSet<_> = g
        .matching(0)
        .iter()
        .map(|e| {
            (
                labels.packets[e.packet].clone(),
                labels.users[e.user].clone(),
            )
        })
        .collect();
    let expected: BTreeSet<_> = [(vec![2], vec![1]), (vec![1], vec![2])]
        .into_iter()
        .collect();
    assert_eq!(m, expected);
    assert_eq!(scheme_params(&g).unwrap().rate, Ratio::new(1, 2));

    assert!(construct_mn(3, 3).is_err());
}

#[test]
fn validation_examples() {
    let g = construct_binomial(4, 1).unwrap();
    let r = validate_rs(&g);
    assert!(r.valid);
    let p = scheme_params(&g).unwrap();
    assert_eq!((p.num_matchings, p.min_right_degree), (4, 2));
    assert_eq!(p.avg_matching_size, Ratio::from_integer(3));
    assert_eq!(p.rate, Ratio::from_integer(1));
    assert_eq!(p.memory_ratio, Ratio::new(1, 2));

    // matching {(0,0),(1,1)} plus a stray edge (0,1) in a second matching
    let g = RsGraph::new(
        2,
        2,
        vec![
            vec![Edge::new(0, 0), Edge::new(1, 1)],
            vec![Edge::new(0, 1)],
        ],
        None,
    )
    .unwrap();
    let r = validate_rs(&g);
    assert!(!r.valid && !r.induced_ok);
    assert!(r
        .violations
        .iter()
        .any(|v| matches!(v, Violation::NotInduced { matching: 0, .. })));

    let g = RsGraph::new(1, 1, vec![vec![Edge::new(0, 0)]], None).unwrap();
    assert!(validate_rs(&g).valid);
    let p = scheme_params(&g).unwrap();
    assert_eq!(
        (p.num_matchings, p.avg_matching_size),
        (1, Ratio::from_integer(1))
    );
}

#[test]
fn full_degree_user_caches_nothing() {
    // user 0 is adjacent to every packet, one per matching
    let g = RsGraph::new(
        3,
        1,
        vec![
            vec![Edge::new(0, 0)],
            vec![Edge::new(1, 0)],
            vec![Edge::new(2, 0)],
        ],
        None,
    )
    .unwrap();
    assert_eq!(
        scheme_params(&g).unwrap().memory_ratio,
        Ratio::from_integer(0)
    );
}

fn cached_labels(g: &RsGraph, user_label: &[u32]) -> BTreeSet<Vec<u32>> {
    let labels = g.labels().unwrap();
    let user = labels.users.iter().position(|u| u == user_label).unwrap();
    let cache = CacheState::for_user(&g.index(), g.num_packets(), user);
    cache.packets().map(|f| labels.packets[f].clone()).collect()
}

#[test]
fn cached_sets() {
    let g = construct_binomial(4, 1).unwrap();
    let expected: BTreeSet<_> = [vec![1], vec![2]].into_iter().collect();
    assert_eq!(cached_labels(&g, &[1, 2]), expected);

    let g = construct_mn(4, 2).unwrap();
    let expected: BTreeSet<_> = [vec![1, 2], vec![1, 3], vec![1, 4]].into_iter().collect();
    assert_eq!(cached_labels(&g, &[1]), expected);

    let g = RsGraph::new(5, 3, Vec::new(), None).unwrap();
    let lib = Library::generate(2, 5, 4, 0).unwrap();
    for cache in codec::place(&g, &lib).unwrap() {
        assert_eq!(cache.len(), 5);
    }
}

#[test]
fn payload_for_subset_123() {
    let g = construct_binomial(4, 1).unwrap();
    let labels = g.labels().unwrap().clone();
    let user_of: HashMap<Vec<u32>, usize> = labels
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), i))
        .collect();
    let packet_of: HashMap<Vec<u32>, usize> = labels
        .packets
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    let lib = Library::generate(6, 4, 16, 11).unwrap();
    let d = DemandVector::new((0..6).collect(), 6).unwrap();
    let tx = codec::deliver(&g, &lib, &d).unwrap();
    assert_eq!(tx.len(), 4);

    let m = labels
        .matchings
        .iter()
        .position(|s| s == &[1, 2, 3])
        .unwrap();
    let mut expected = vec![0u8; 16];
    for (user, packet) in [
        (vec![2, 3], vec![1]),
        (vec![1, 3], vec![2]),
        (vec![1, 2], vec![3]),
    ] {
        let file = d.get(user_of[&user]);
        for (x, y) in expected
            .iter_mut()
            .zip(lib.packet(file, packet_of[&packet]))
        {
            *x ^= y;
        }
    }
    let t = tx.iter().find(|t| t.matching_index == m).unwrap();
    assert_eq!(t.payload, expected);
}

#[test]
fn single_edge_payload_is_verbatim() {
    let g = RsGraph::new(2, 1, vec![vec![Edge::new(1, 0)]], None).unwrap();
    let lib = Library::generate(3, 2, 8, 5).unwrap();
    let d = DemandVector::new(vec![2], 3).unwrap();
    let tx = codec::deliver(&g, &lib, &d).unwrap();
    assert_eq!(tx[0].payload, lib.packet(2, 1));
}

#[test]
fn transmission_count_ignores_demands() {
    let g = construct_binomial(6, 2).unwrap();
    let lib = Library::generate(4, 15, 4, 3).unwrap();
    let d1 = DemandVector::new(vec![0; 15], 4).unwrap();
    let d2 = DemandVector::new((0..15).map(|u| u % 4).collect(), 4).unwrap();
    assert_eq!(
        codec::deliver(&g, &lib, &d1).unwrap().len(),
        codec::deliver(&g, &lib, &d2).unwrap().len()
    );
}

#[test]
fn decode_examples() {
    let g = construct_binomial(4, 1).unwrap();
    let lib = Library::generate(6, 4, 32, 21).unwrap();
    let d = DemandVector::new((0..6).collect(), 6).unwrap();
    let caches = codec::place(&g, &lib).unwrap();
    let tx = codec::deliver(&g, &lib, &d).unwrap();
    let user = g
        .labels()
        .unwrap()
        .users
        .iter()
        .position(|u| u == &[1, 2])
        .unwrap();
    let file = codec::decode(user, &caches[user], &tx, &d, &lib).unwrap();
    assert_eq!(file, lib.file(d.get(user)));

    // a user adjacent to nothing reads only its cache
    let g = RsGraph::new(3, 2, vec![vec![Edge::new(0, 0)]], None).unwrap();
    let lib = Library::generate(2, 3, 4, 1).unwrap();
    let d = DemandVector::new(vec![0, 1], 2).unwrap();
    let caches = codec::place(&g, &lib).unwrap();
    assert_eq!(caches[1].len(), 3);
    let file = codec::decode(1, &caches[1], &[], &d, &lib).unwrap();
    assert_eq!(file, lib.file(1));

    let g = construct_mn(5, 2).unwrap();
    let lib = Library::generate(3, g.num_packets(), 8, 2).unwrap();
    let d = DemandVector::new(vec![2; 5], 3).unwrap();
    assert!(codec::verify_delivery(&g, &lib, &d).unwrap().ok);
}

#[test]
fn verify_examples() {
    let g = construct_binomial(6, 2).unwrap();
    let lib = Library::generate(20, 15, 16, 4).unwrap();
    let d = DemandVector::new((0..15).collect(), 20).unwrap();
    assert!(codec::verify_delivery(&g, &lib, &d).unwrap().ok);

    let g = construct_mn(4, 2).unwrap();
    let lib = Library::generate(4, 6, 16, 4).unwrap();
    let d = DemandVector::new(vec![1; 4], 4).unwrap();
    assert!(codec::verify_delivery(&g, &lib, &d).unwrap().ok);
}

#[test]
fn corruption_is_localized() {
    let g = construct_binomial(6, 2).unwrap();
    let lib = Library::generate(15, 15, 8, 9).unwrap();
    let d = DemandVector::new((0..15).collect(), 15).unwrap();
    let caches = codec::place(&g, &lib).unwrap();
    let mut tx = codec::deliver(&g, &lib, &d).unwrap();
    let hit = 4;
    tx[hit].payload[0] ^= 0xFF;
    let check = codec::verify_transmissions(&g, &lib, &d, &caches, &tx);
    assert!(!check.ok);
    let on_matching: BTreeSet<usize> = g.matching(hit).iter().map(|e| e.user).collect();
    let affected: BTreeSet<usize> = check.mismatches.iter().map(|m| m.user).collect();
    assert_eq!(affected, on_matching);
    for m in &check.mismatches {
        let expected: Vec<usize> = g
            .matching(hit)
            .iter()
            .filter(|e| e.user == m.user)
            .map(|e| e.packet)
            .collect();
        assert_eq!(m.packets, expected);
    }
}
