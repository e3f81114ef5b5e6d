#![allow(dead_code)]

use cdrec_core::data::{build_scenario, CrossDomainScenario, FilterThresholds, SplitSeedConfig};
use cdrec_core::embed::EmbedTrainConfig;
use cdrec_core::synth::{generate_synthetic, SynthParams};

pub const LOOSE: FilterThresholds = FilterThresholds {
    min_overlap_interactions: 2,
    min_other_interactions: 1,
};

/// 120 users, 80 + 80 items, six interactions per user, 60 overlapping.
pub fn toy_params(seed: u64) -> SynthParams {
    SynthParams {
        n_users: 120,
        n_source_items: 80,
        n_target_items: 80,
        k_true: 3,
        overlap_fraction: 0.5,
        density: 0.075,
        seed,
    }
}

pub fn toy_scenario(seed: u64, phi: f64) -> CrossDomainScenario {
    let (s, t) = generate_synthetic(&toy_params(seed)).unwrap();
    let split = SplitSeedConfig {
        seed,
        test_fraction: 0.5,
        phi,
    };
    build_scenario(&s, &t, LOOSE, &split).unwrap()
}

pub fn quick_embed(seed: u64) -> EmbedTrainConfig {
    EmbedTrainConfig {
        dim: 4,
        lr: 0.01,
        epochs: 20,
        batch_size: 128,
        seed,
        ..EmbedTrainConfig::default()
    }
}
