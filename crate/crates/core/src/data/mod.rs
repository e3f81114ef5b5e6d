//! Interaction logs, cross-domain scenarios and negative sampling.

mod interactions;
mod sampling;
mod scenario;

pub use interactions::{load_interactions, parse_interactions, InteractionSet};
pub use sampling::{sample_negatives, user_stream};
pub use scenario::{
    build_scenario, build_unified, filter_to_fixed_point, parse_meta, CrossDomainScenario,
    FilterThresholds, SplitSeedConfig, TestCase,
};
