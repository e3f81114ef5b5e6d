//! Cross-domain recommendation for cold-start users.
//!
//! The pipeline learns a metric space per domain ([`embed`]), learns a
//! mapping from the source space into the target space with overlapping
//! users as labels and source items as unlabeled anchors ([`mapper`]),
//! infers cold-start users from their aggregated source neighbourhood
//! ([`coldstart`]) and scores them with leave-one-out ranking metrics
//! ([`eval`]). [`experiment`] wires the baselines and the full method
//! together; [`synth`] generates desk-scale benchmark data.

pub mod coldstart;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod mapper;
pub mod optim;
pub mod synth;

pub use error::{Error, ErrorClass, Result};

/// A trained model plus its per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub epoch_losses: Vec<f64>,
    /// Epoch whose parameters were kept (the last one without validation).
    pub best_epoch: usize,
}
