use std::collections::BTreeMap;

use ndarray::Array2;
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{bpr_triplet_grad, cml_triplet_grad};
use super::{project_row, row, EmbeddingSpace, SpaceKind};
use crate::data::InteractionSet;
use crate::error::{Error, Result};
use crate::optim::{AdamParams, RowAdam};
use crate::Trained;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedTrainConfig {
    pub dim: usize,
    /// Hinge margin, metric objective only.
    pub margin: f64,
    pub lr: f64,
    /// L2 weight on the vectors of each triplet, inner-product objective only.
    pub reg: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Validation hook cadence, in epochs.
    pub eval_every: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            dim: 50,
            margin: 1.0,
            lr: 0.001,
            reg: 0.001,
            epochs: 500,
            patience: 30,
            eval_every: 5,
            batch_size: 1024,
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Scores a snapshot on held-out data; higher is better.
pub type ValidationHook<'a> = &'a mut dyn FnMut(&EmbeddingSpace) -> Result<f64>;

fn init_matrix(rows: usize, dim: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (dim as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, dim), || dist.sample(rng))
}

/// Trains user and item vectors on `data`.
///
/// Each epoch visits every observed pair once in shuffled order, draws one
/// uniform negative per pair, and applies a row-sparse Adam step per batch.
/// In metric spaces every touched row is projected back onto the unit ball
/// after the step. With a validation hook the best-scoring snapshot is kept
/// and training stops after `patience` epochs without improvement.
pub fn train_embeddings(
    data: &InteractionSet,
    cfg: &EmbedTrainConfig,
    kind: SpaceKind,
    mut hook: Option<ValidationHook<'_>>,
) -> Result<Trained<EmbeddingSpace>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut users = init_matrix(data.n_users(), dim, &mut rng);
    let mut items = init_matrix(data.n_items(), dim, &mut rng);
    if kind == SpaceKind::Metric {
        (0..data.n_users()).for_each(|i| project_row(&mut users, i));
        (0..data.n_items()).for_each(|i| project_row(&mut items, i));
    }

    let hp = AdamParams::with_lr(cfg.lr);
    let mut user_opt = RowAdam::new(data.n_users(), dim, hp);
    let mut item_opt = RowAdam::new(data.n_items(), dim, hp);

    let n_items = data.n_items();
    let mut pairs: Vec<(usize, usize)> = data
        .pairs()
        .filter(|&(u, _)| data.items_of(u).len() < n_items)
        .collect();
    if pairs.is_empty() {
        return Err(Error::DegenerateScenario(
            "every user interacted with every item; no negatives exist".into(),
        ));
    }

    let mut space = EmbeddingSpace {
        kind,
        user_ids: data.user_ids().to_vec(),
        item_ids: data.item_ids().to_vec(),
        users: Array2::zeros((0, dim)),
        items: Array2::zeros((0, dim)),
    };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Array2<f64>, Array2<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in pairs.chunks(cfg.batch_size) {
            let mut user_grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut item_grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for &(u, pos) in batch {
                let neg = loop {
                    let k = rng.gen_range(0..n_items);
                    if !data.contains(u, k) {
                        break k;
                    }
                };
                let (uv, pv, nv) = (row(&users, u), row(&items, pos), row(&items, neg));
                let mut g = match kind {
                    SpaceKind::Metric => cml_triplet_grad(uv, pv, nv, cfg.margin)?,
                    SpaceKind::InnerProduct => bpr_triplet_grad(uv, pv, nv)?,
                };
                if kind == SpaceKind::InnerProduct && cfg.reg > 0.0 {
                    for (grad, vec) in [(&mut g.user, uv), (&mut g.pos, pv), (&mut g.neg, nv)] {
                        for (gk, &xk) in grad.iter_mut().zip(vec) {
                            g.loss += cfg.reg * xk * xk;
                            *gk += 2.0 * cfg.reg * xk;
                        }
                    }
                }
                epoch_loss += g.loss;
                accumulate(&mut user_grads, u, &g.user);
                accumulate(&mut item_grads, pos, &g.pos);
                accumulate(&mut item_grads, neg, &g.neg);
            }
            user_opt.tick();
            item_opt.tick();
            for (&u, g) in &user_grads {
                user_opt.update_row(&mut users, u, g);
            }
            for (&i, g) in &item_grads {
                item_opt.update_row(&mut items, i, g);
            }
            if kind == SpaceKind::Metric {
                user_grads.keys().for_each(|&u| project_row(&mut users, u));
                item_grads.keys().for_each(|&i| project_row(&mut items, i));
            }
        }
        let mean = epoch_loss / pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        epoch_losses.push(mean);

        if let Some(hook) = hook.as_mut() {
            if epoch % cfg.eval_every.max(1) == 0 || epoch == cfg.epochs {
                space.users = users.clone();
                space.items = items.clone();
                let score = hook(&space)?;
                log::debug!("epoch {epoch}: loss {mean:.5} validation {score:.4}");
                match &best {
                    Some((b, ..)) if score <= *b => {}
                    _ => best = Some((score, epoch, users.clone(), items.clone())),
                }
                let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
                if epoch - best_epoch >= cfg.patience {
                    break;
                }
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, u, i)) => {
            users = u;
            items = i;
            epoch
        }
        None => epoch_losses.len(),
    };
    space.users = users;
    space.items = items;
    Ok(Trained {
        model: space,
        epoch_losses,
        best_epoch,
    })
}

fn accumulate(map: &mut BTreeMap<usize, Vec<f64>>, idx: usize, grad: &[f64]) {
    let entry = map.entry(idx).or_insert_with(|| vec![0.0; grad.len()]);
    for (a, g) in entry.iter_mut().zip(grad) {
        *a += g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::sq_dist;

    fn toy() -> InteractionSet {
        InteractionSet::from_pairs([
            ("u0", "i0"),
            ("u0", "i1"),
            ("u1", "i1"),
            ("u1", "i2"),
            ("u2", "i3"),
            ("u2", "i4"),
            ("u3", "i4"),
            ("u3", "i5"),
        ])
    }

    fn cfg(dim: usize) -> EmbedTrainConfig {
        EmbedTrainConfig {
            dim,
            lr: 0.01,
            epochs: 50,
            batch_size: 4,
            seed: 42,
            ..EmbedTrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_for_both_objectives() {
        for kind in [SpaceKind::Metric, SpaceKind::InnerProduct] {
            let t = train_embeddings(&toy(), &cfg(8), kind, None).unwrap();
            assert_eq!(t.epoch_losses.len(), 50);
            assert!(t.epoch_losses[49] < t.epoch_losses[0], "{kind:?}: {:?}", t.epoch_losses);
        }
    }

    #[test]
    fn metric_rows_stay_in_unit_ball() {
        let mut c = cfg(2);
        c.lr = 0.1;
        let t = train_embeddings(&toy(), &c, SpaceKind::Metric, None).unwrap();
        assert!(t.model.max_row_norm() <= 1.0 + 1e-6);
        assert_eq!(t.model.users.nrows(), 4);
        assert_eq!(t.model.items.nrows(), 6);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = train_embeddings(&toy(), &cfg(4), SpaceKind::Metric, None).unwrap();
        let b = train_embeddings(&toy(), &cfg(4), SpaceKind::Metric, None).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn separates_positives_from_negatives() {
        let data = toy();
        let mut c = cfg(4);
        c.epochs = 200;
        let space = train_embeddings(&data, &c, SpaceKind::Metric, None).unwrap().model;
        let (mut pos, mut n_pos, mut neg, mut n_neg) = (0.0, 0, 0.0, 0);
        for u in 0..data.n_users() {
            for i in 0..data.n_items() {
                let d = sq_dist(space.user(u), space.item(i));
                if data.contains(u, i) {
                    pos += d;
                    n_pos += 1;
                } else {
                    neg += d;
                    n_neg += 1;
                }
            }
        }
        assert!(pos / n_pos as f64 * 2.0 < neg / n_neg as f64);
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = InteractionSet::from_pairs(Vec::<(String, String)>::new());
        assert!(matches!(
            train_embeddings(&data, &cfg(2), SpaceKind::Metric, None),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn early_stopping_keeps_best_snapshot() {
        let mut calls = 0;
        let mut hook = |_: &EmbeddingSpace| -> Result<f64> {
            calls += 1;
            // improves once, then plateaus
            Ok(if calls == 1 { 0.5 } else { 0.1 })
        };
        let mut c = cfg(4);
        c.epochs = 100;
        c.eval_every = 1;
        c.patience = 3;
        let t = train_embeddings(&toy(), &c, SpaceKind::Metric, Some(&mut hook)).unwrap();
        assert_eq!(t.best_epoch, 1);
        assert_eq!(t.epoch_losses.len(), 4);
    }
}
