mod common;

use cdrec_core::data::{CrossDomainScenario, InteractionSet, SplitSeedConfig, TestCase};
use cdrec_core::embed::{EmbeddingSpace, SpaceKind};
use cdrec_core::experiment::train_domain_spaces;
use cdrec_core::mapper::{supervised_loss, train_mapping, MapMode, MapTrainConfig};
use cdrec_core::Error;
use ndarray::Array2;

use common::{quick_embed, toy_scenario, LOOSE};

fn map_cfg(mode: MapMode, lambda: f64, epochs: usize) -> MapTrainConfig {
    MapTrainConfig {
        mode,
        lambda,
        epochs,
        lr: 0.01,
        batch_size: 8,
        seed: 11,
        ..MapTrainConfig::default()
    }
}

#[test]
fn zero_lambda_matches_supervised_mode() {
    let sc = toy_scenario(3, 1.0);
    let (s, t) = train_domain_spaces(&sc, &quick_embed(3), SpaceKind::Metric).unwrap();
    let sup = train_mapping(&s, &t, &sc, &map_cfg(MapMode::SupervisedOnly, 0.5, 40), None).unwrap();
    let semi = train_mapping(&s, &t, &sc, &map_cfg(MapMode::SemiSupervised, 0.0, 40), None).unwrap();
    assert_eq!(sup.model, semi.model);
    assert_eq!(sup.epoch_losses, semi.epoch_losses);
}

#[test]
fn ten_user_toy_reduces_supervised_loss() {
    let sc = toy_scenario(4, 1.0 / 3.0);
    assert_eq!(sc.train_overlap_users.len(), 10);
    let (s, t) = train_domain_spaces(&sc, &quick_embed(4), SpaceKind::Metric).unwrap();
    let sup = train_mapping(&s, &t, &sc, &map_cfg(MapMode::SupervisedOnly, 0.0, 200), None).unwrap();
    assert!(sup.epoch_losses.last().unwrap() < sup.epoch_losses.first().unwrap());

    let semi = train_mapping(&s, &t, &sc, &map_cfg(MapMode::SemiSupervised, 0.5, 200), None).unwrap();
    assert!(semi.epoch_losses.last().unwrap() < semi.epoch_losses.first().unwrap());

    // every overlapping user's source vector maps inside the unit ball
    for u in &sc.overlap_users {
        let i = sc.source.user_idx(u).unwrap();
        let y = semi.model.forward(s.user(i)).unwrap();
        assert!(y.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + 1e-6);
    }
}

/// Hand-built scenario whose target vectors are a fixed rotation of the
/// source vectors. The last user is a test user whose target row is NaN.
fn rotation_problem(n: usize) -> (CrossDomainScenario, EmbeddingSpace, EmbeddingSpace) {
    let ids: Vec<String> = (0..n).map(|i| format!("u{i:02}")).collect();
    let src_pairs: Vec<(String, String)> = ids
        .iter()
        .enumerate()
        .flat_map(|(i, u)| {
            let a = format!("a{}", i % 3);
            let b = format!("b{}", i % 5);
            [(u.clone(), a), (u.clone(), b)]
        })
        .collect();
    let source = InteractionSet::from_pairs(src_pairs);
    let train: Vec<String> = ids[..n - 1].to_vec();
    let target = InteractionSet::from_pairs(train.iter().map(|u| (u.clone(), "t0".to_string())));

    // deterministic points inside the ball of radius 0.7
    let mut src = Array2::zeros((n, 4));
    for i in 0..n {
        for k in 0..4 {
            let x = ((i * 7 + k * 13) % 17) as f64 / 17.0 - 0.5;
            src[[i, k]] = 0.7 * x;
        }
    }
    // rotation by 0.6 rad in the (0,1) plane and 1.1 rad in the (2,3) plane
    let (c1, s1, c2, s2) = (0.6f64.cos(), 0.6f64.sin(), 1.1f64.cos(), 1.1f64.sin());
    let mut tgt = Array2::zeros((n, 4));
    for i in 0..n {
        let x = src.row(i);
        tgt[[i, 0]] = c1 * x[0] - s1 * x[1];
        tgt[[i, 1]] = s1 * x[0] + c1 * x[1];
        tgt[[i, 2]] = c2 * x[2] - s2 * x[3];
        tgt[[i, 3]] = s2 * x[2] + c2 * x[3];
    }
    for k in 0..4 {
        tgt[[n - 1, k]] = f64::NAN;
    }
    let item_src = Array2::from_elem((source.n_items(), 4), 0.1);
    let source_space = EmbeddingSpace {
        kind: SpaceKind::Metric,
        user_ids: source.user_ids().to_vec(),
        item_ids: source.item_ids().to_vec(),
        users: src,
        items: item_src,
    };
    let target_space = EmbeddingSpace {
        kind: SpaceKind::Metric,
        user_ids: ids.clone(),
        item_ids: vec!["t0".into()],
        users: tgt,
        items: Array2::zeros((1, 4)),
    };
    let scenario = CrossDomainScenario {
        source,
        target,
        overlap_users: ids.clone(),
        test_cases: vec![TestCase {
            user: ids[n - 1].clone(),
            test_item: 0,
            valid_item: 0,
            withheld: vec![],
        }],
        train_overlap_users: train,
        split: SplitSeedConfig::default(),
        thresholds: LOOSE,
    };
    (scenario, source_space, target_space)
}

#[test]
fn rotation_is_learned_without_reading_test_targets() {
    let (sc, s, t) = rotation_problem(51);
    let cfg = MapTrainConfig {
        mode: MapMode::SupervisedOnly,
        lr: 0.01,
        epochs: 3000,
        batch_size: 50,
        seed: 2,
        ..MapTrainConfig::default()
    };
    // the test user's NaN target row would poison the loss if it were read
    let trained = train_mapping(&s, &t, &sc, &cfg, None).unwrap();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = sc
        .train_overlap_users
        .iter()
        .map(|u| {
            let i = sc.source.user_idx(u).unwrap();
            let j = t.user_ids.iter().position(|x| x == u).unwrap();
            (s.user(i).to_vec(), t.user(j).to_vec())
        })
        .collect();
    let mean = supervised_loss(&trained.model, &pairs).unwrap() / pairs.len() as f64;
    assert!(mean < 0.05, "mean residual {mean}");
}

#[test]
fn test_user_in_training_set_is_rejected() {
    let (mut sc, s, t) = rotation_problem(12);
    let leaked = sc.test_cases[0].user.clone();
    sc.train_overlap_users.push(leaked);
    let err = train_mapping(&s, &t, &sc, &MapTrainConfig::default(), None).unwrap_err();
    assert!(matches!(err, Error::IndexMismatch(_)));
}

#[test]
fn empty_overlap_is_an_error() {
    let (mut sc, s, t) = rotation_problem(12);
    sc.train_overlap_users.clear();
    let err = train_mapping(&s, &t, &sc, &MapTrainConfig::default(), None).unwrap_err();
    assert!(matches!(err, Error::NoOverlapUsers));
}
