mod common;

use std::collections::HashSet;

use cdrec_core::coldstart::{aggregate, rank_order};
use cdrec_core::data::{build_scenario, build_unified, SplitSeedConfig};
use cdrec_core::embed::{EmbeddingSpace, SpaceKind};
use cdrec_core::eval::rank_of_test_item;
use cdrec_core::mapper::MappingNetwork;
use cdrec_core::synth::generate_synthetic;
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mapped_vectors_stay_in_ball(
        seed in any::<u64>(),
        scale in 0.1f64..20.0,
        x in prop::collection::vec(-50.0f64..50.0, 5),
    ) {
        let mut net = MappingNetwork::init(5, &mut ChaCha8Rng::seed_from_u64(seed));
        for block in net.params_mut() {
            for w in block.iter_mut() {
                *w *= scale;
            }
        }
        prop_assert!(norm(&net.forward(&x).unwrap()) <= 1.0 + 1e-6);
    }

    #[test]
    fn rank_matches_sorted_position(
        scores in prop::collection::vec(0u8..6, 2..60),
        pick in any::<prop::sample::Index>(),
        higher in any::<bool>(),
    ) {
        let scored: Vec<(usize, f64)> = scores.iter().enumerate().map(|(i, &s)| (i, s as f64)).collect();
        let target = pick.index(scored.len());
        let mut sorted = scored.clone();
        rank_order(&mut sorted, higher);
        let expected = sorted.iter().position(|&(i, _)| i == target).unwrap() + 1;
        prop_assert_eq!(rank_of_test_item(&scored, target, higher).unwrap(), expected);
    }

    #[test]
    fn scenario_partitions_overlap_users(seed in 0u64..500, phi in 0.05f64..1.0) {
        let (s, t) = generate_synthetic(&common::toy_params(seed)).unwrap();
        let split = SplitSeedConfig { seed, test_fraction: 0.5, phi };
        let sc = build_scenario(&s, &t, common::LOOSE, &split).unwrap();
        let test: HashSet<&str> = sc.test_cases.iter().map(|c| c.user.as_str()).collect();
        for u in &sc.train_overlap_users {
            prop_assert!(!test.contains(u.as_str()));
            prop_assert!(sc.overlap_users.binary_search(u).is_ok());
        }
        for c in &sc.test_cases {
            prop_assert!(sc.target.user_idx(&c.user).is_none());
            prop_assert!(c.test_item != c.valid_item);
        }
        // held-out target items never reach the unified training set
        let unified = build_unified(&sc);
        for c in &sc.test_cases {
            let u = unified.user_idx(&c.user).unwrap();
            let held = format!("t:{}", sc.target.item_id(c.test_item));
            let j = unified.item_idx(&held).unwrap();
            prop_assert!(!unified.contains(u, j));
        }
    }

    #[test]
    fn aggregation_stays_in_convex_hull(seed in any::<u64>(), hops in 0usize..4) {
        let sc = common::toy_scenario(seed % 50, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rand_rows = |n: usize, rng: &mut ChaCha8Rng| {
            use rand::Rng;
            Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0))
        };
        let space = EmbeddingSpace {
            kind: SpaceKind::Metric,
            user_ids: sc.source.user_ids().to_vec(),
            item_ids: sc.source.item_ids().to_vec(),
            users: rand_rows(sc.source.n_users(), &mut rng),
            items: rand_rows(sc.source.n_items(), &mut rng),
        };
        let agg = aggregate(&space, &sc.source, hops).unwrap();
        for k in 0..3 {
            let lo = space.users.column(k).iter().chain(space.items.column(k)).cloned().fold(f64::INFINITY, f64::min);
            let hi = space.users.column(k).iter().chain(space.items.column(k)).cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in agg.users.column(k).iter().chain(agg.items.column(k)) {
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}
