mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rscache::ballsbins::{self, make_adversary, Adversary, BinsState};
use rscache::codec::{self, DemandVector, Library};
use rscache::decentral::{self, VirtualPool};
use rscache::rsgraph::{construct_binomial, construct_mn, validate_rs, Construction};

use common::choose;

fn binomial_params() -> impl Strategy<Value = (u32, u32)> {
    (3u32..=9).prop_flat_map(|n| (Just(n), 1..=n - 2))
}

fn mn_params() -> impl Strategy<Value = (u32, u32)> {
    (2u32..=8).prop_flat_map(|k| (Just(k), 1..k))
}

fn any_small() -> impl Strategy<Value = Construction> {
    prop_oneof![
        binomial_params().prop_map(|(n, a)| Construction::Binomial { n, a }),
        mn_params().prop_map(|(users, s)| Construction::Mn { users, s }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binomial_partition_and_regularity((n, a) in binomial_params()) {
        let g = construct_binomial(n, a).unwrap();
        let report = validate_rs(&g);
        prop_assert!(report.valid);
        let (n, a) = (u64::from(n), u64::from(a));
        prop_assert_eq!(
            g.num_matchings() as u64 * choose(a + 2, 2),
            g.num_users() as u64 * choose(n - 2, a)
        );
        let degrees = g.user_degrees();
        prop_assert!(degrees.iter().all(|&d| d as u64 == choose(n - 2, a)));
    }

    #[test]
    fn mn_partition((k, s) in mn_params()) {
        let g = construct_mn(k, s).unwrap();
        prop_assert!(validate_rs(&g).valid);
        let degrees = g.user_degrees();
        prop_assert!(degrees.iter().all(|&d| d as u64 == choose(u64::from(k) - 1, u64::from(s))));
    }

    #[test]
    fn every_user_decodes(
        spec in any_small(),
        files in 1usize..12,
        bytes in 1usize..24,
        seed in any::<u64>(),
        demand_seed in any::<u64>(),
    ) {
        let g = spec.build().unwrap();
        let lib = Library::generate(files, g.num_packets(), bytes, seed).unwrap();
        let mut x = demand_seed;
        let d: Vec<usize> = (0..g.num_users())
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 33) as usize % files
            })
            .collect();
        let d = DemandVector::new(d, files).unwrap();
        let check = codec::verify_delivery(&g, &lib, &d).unwrap();
        prop_assert!(check.ok, "{:?}", check.mismatches);
        prop_assert_eq!(check.num_transmissions, g.num_matchings());
    }

    #[test]
    fn bound_shifts_by_one(balls in 0u64..1_000_000, bins in 3u64..100_000) {
        let a = ballsbins::bound_static(balls + bins, bins).unwrap();
        let b = ballsbins::bound_static(balls, bins).unwrap();
        prop_assert!((a - b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn placement_matches_bins(users in 0usize..2000, seed in any::<u64>()) {
        let g = Arc::new(construct_binomial(7, 2).unwrap());
        let mut pool = VirtualPool::new(g.clone(), 2048).unwrap();
        pool.place_all(users, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let bins = ballsbins::run_static(users, g.num_users(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(pool.loads(), bins.loads());
    }

    #[test]
    fn churn_conserves_population(
        cap in 1usize..300,
        steps in 0usize..600,
        kind in 0u8..3,
        seed in any::<u64>(),
    ) {
        let adv = match kind {
            0 => Adversary::Fifo,
            1 => Adversary::Lifo,
            _ => Adversary::RandomFixed(seed ^ 1),
        };
        let script = make_adversary(&adv, cap, steps).unwrap();
        let run = ballsbins::run_dynamic(&script, 7, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(run.series[cap - 1..].iter().all(|p| p.population == cap));
        prop_assert_eq!(run.height_violations, 0);
        for row in ballsbins::height_histogram(&run.state) {
            prop_assert!(row.mu_ge >= row.nu_ge);
        }

        let g = Arc::new(construct_mn(7, 3).unwrap());
        let mut pool = VirtualPool::new(g, 1024).unwrap();
        let events = decentral::run_churn(&mut pool, &script, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(pool.population(), cap);
        prop_assert_eq!(pool.loads().iter().map(|&l| l as usize).sum::<usize>(), cap);
        let numbered: Vec<_> = events.into_iter().enumerate().map(|(i, e)| (i + 1, e)).collect();
        prop_assert!(decentral::replay(&numbered, 7, 1024).unwrap().ok);
    }

    #[test]
    fn heights_dominate_loads_under_explicit_deletions(
        ops in proptest::collection::vec((any::<bool>(), 0usize..5, any::<u16>()), 1..200),
    ) {
        let mut s = BinsState::new(5).unwrap();
        let mut alive: Vec<u64> = Vec::new();
        for (insert, bin, pick) in ops {
            if insert || alive.is_empty() {
                alive.push(s.insert_into(bin));
            } else {
                let t = alive.swap_remove(pick as usize % alive.len());
                s.delete(t).unwrap();
            }
            prop_assert!(s.heights_dominate_loads());
            for row in ballsbins::height_histogram(&s) {
                prop_assert!(row.mu_ge >= row.nu_ge);
            }
        }
    }

    #[test]
    fn graph_json_round_trip(spec in any_small()) {
        let g = spec.build().unwrap();
        let back = rscache::rsgraph::RsGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back, g);
    }
}
