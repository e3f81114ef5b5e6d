//! Cross-domain mapping network `[K -> 2K -> K]` with a tanh hidden layer
//! and unit-ball projection on the output, trained on overlapping users
//! (supervised term) and, optionally, on source items ranked against the
//! overlapping users' target vectors (unsupervised hinge term).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::CrossDomainScenario;
use crate::embed::io_fmt_float;
use crate::embed::{check_dims, dot, sq_dist, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamParams};
use crate::Trained;

#[derive(Debug, Clone, PartialEq)]
pub struct MappingNetwork {
    /// `2K x K`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `K x 2K`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Pass {
    hidden: Vec<f64>,
    out: Vec<f64>,
    /// Norm of the pre-projection output when the projection was active.
    scaled_by: Option<f64>,
}

impl MappingNetwork {
    pub fn zeros(dim: usize) -> Self {
        MappingNetwork {
            w1: Array2::zeros((2 * dim, dim)),
            b1: Array1::zeros(2 * dim),
            w2: Array2::zeros((dim, 2 * dim)),
            b2: Array1::zeros(dim),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(dim);
        let bound = (6.0 / (3 * dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        net.w1.mapv_inplace(|_| dist.sample(rng));
        net.w2.mapv_inplace(|_| dist.sample(rng));
        net
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    /// The four parameter blocks in `W1, b1, W2, b2` order.
    pub fn params(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    fn pass(&self, x: &[f64]) -> Pass {
        let dim = self.dim();
        let w1 = self.w1.as_slice().unwrap();
        let w2 = self.w2.as_slice().unwrap();
        let hidden: Vec<f64> = (0..2 * dim)
            .map(|r| (dot(&w1[r * dim..(r + 1) * dim], x) + self.b1[r]).tanh())
            .collect();
        let mut out: Vec<f64> = (0..dim)
            .map(|r| dot(&w2[r * 2 * dim..(r + 1) * 2 * dim], &hidden) + self.b2[r])
            .collect();
        let norm = dot(&out, &out).sqrt();
        let scaled_by = if norm > 1.0 {
            out.iter_mut().for_each(|v| *v /= norm);
            Some(norm)
        } else {
            None
        };
        Pass {
            hidden,
            out,
            scaled_by,
        }
    }

    /// `proj(W2 tanh(W1 x + b1) + b2)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim(), x.len())?;
        Ok(self.pass(x).out)
    }

    /// Accumulates into `grads` the parameter gradient of a loss whose
    /// gradient with respect to the network output is `d_out`.
    fn backward(&self, x: &[f64], pass: &Pass, d_out: &[f64], grads: &mut MappingNetwork) {
        let dim = self.dim();
        let mut dz = d_out.to_vec();
        if let Some(norm) = pass.scaled_by {
            // Jacobian of z / |z| is (I - y y^T) / |z| with y the projected output.
            let yg = dot(&pass.out, d_out);
            for (k, d) in dz.iter_mut().enumerate() {
                *d = (d_out[k] - pass.out[k] * yg) / norm;
            }
        }
        let w2 = self.w2.as_slice().unwrap();
        let gw2 = grads.w2.as_slice_mut().unwrap();
        let mut dh = vec![0.0; 2 * dim];
        for r in 0..dim {
            grads.b2[r] += dz[r];
            for c in 0..2 * dim {
                gw2[r * 2 * dim + c] += dz[r] * pass.hidden[c];
                dh[c] += w2[r * 2 * dim + c] * dz[r];
            }
        }
        let gw1 = grads.w1.as_slice_mut().unwrap();
        for r in 0..2 * dim {
            let da = dh[r] * (1.0 - pass.hidden[r] * pass.hidden[r]);
            grads.b1[r] += da;
            for c in 0..dim {
                gw1[r * dim + c] += da * x[c];
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("K {}\n", self.dim());
        let mut line = |vals: &[f64]| {
            for (k, &v) in vals.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                io_fmt_float(&mut out, v);
            }
            out.push('\n');
        };
        for r in self.w1.rows() {
            line(r.as_slice().unwrap());
        }
        line(self.b1.as_slice().unwrap());
        for r in self.w2.rows() {
            line(r.as_slice().unwrap());
        }
        line(self.b2.as_slice().unwrap());
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::EmptyDataset)?;
        let dim: usize = header
            .strip_prefix("K ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::MalformedLine {
                line: 1,
                reason: "expected `K <dim>`".into(),
            })?;
        let rows: Vec<Vec<f64>> = lines
            .enumerate()
            .map(|(n, l)| {
                l.split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::MalformedLine {
                        line: n + 2,
                        reason: "bad float".into(),
                    })
            })
            .collect::<Result<_>>()?;
        let expected = [(2 * dim, dim), (1, 2 * dim), (dim, 2 * dim), (1, dim)];
        if rows.len() != expected.iter().map(|e| e.0).sum::<usize>() {
            return Err(Error::MalformedLine {
                line: rows.len() + 1,
                reason: format!("expected {} parameter rows", 5 * dim + 2),
            });
        }
        let mut net = MappingNetwork::zeros(dim);
        let mut rows = rows.into_iter();
        for (block, (n_rows, width)) in net.params_mut().into_iter().zip(expected) {
            for r in 0..n_rows {
                let row = rows.next().unwrap();
                check_dims(width, row.len())?;
                block[r * width..(r + 1) * width].copy_from_slice(&row);
            }
        }
        Ok(net)
    }
}

/// `mlp_forward`: the mapped vector of `x`.
pub fn mlp_forward(net: &MappingNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

/// Sum over pairs of the squared distance between the mapped source vector
/// and the target vector.
pub fn supervised_loss(net: &MappingNetwork, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    pairs.iter().try_fold(0.0, |acc, (s, t)| {
        check_dims(net.dim(), t.len())?;
        Ok(acc + sq_dist(&net.forward(s)?, t))
    })
}

/// `[m + d(f(v_pos), u_t) - d(f(v_neg), u_t)]_+`.
pub fn unsupervised_triplet_loss(
    net: &MappingNetwork,
    v_pos: &[f64],
    v_neg: &[f64],
    u_target: &[f64],
    margin: f64,
) -> Result<f64> {
    check_dims(net.dim(), u_target.len())?;
    let a = net.forward(v_pos)?;
    let b = net.forward(v_neg)?;
    Ok((margin + sq_dist(&a, u_target) - sq_dist(&b, u_target)).max(0.0))
}

pub fn total_mapping_loss(supervised: f64, unsupervised: f64, lambda: f64) -> f64 {
    supervised + lambda * unsupervised
}

/// One overlapping user's contribution to a mapping batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSample {
    pub source_user: Vec<f64>,
    pub target_user: Vec<f64>,
    /// Source vectors of an interacted and a non-interacted source item.
    pub triplet: Option<(Vec<f64>, Vec<f64>)>,
}

/// Loss of a batch split into its parts, plus the parameter gradient of
/// `supervised + lambda * unsupervised`.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub supervised: f64,
    pub unsupervised: f64,
    pub total: f64,
    pub grad: MappingNetwork,
}

pub fn batch_loss_and_grad(
    net: &MappingNetwork,
    batch: &[MapSample],
    lambda: f64,
    margin: f64,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = net.dim();
    let mut grad = MappingNetwork::zeros(dim);
    let (mut sup, mut unsup) = (0.0, 0.0);
    let mut d_out = vec![0.0; dim];
    for s in batch {
        check_dims(dim, s.source_user.len())?;
        check_dims(dim, s.target_user.len())?;
        let p = net.pass(&s.source_user);
        sup += sq_dist(&p.out, &s.target_user);
        for k in 0..dim {
            d_out[k] = 2.0 * (p.out[k] - s.target_user[k]);
        }
        net.backward(&s.source_user, &p, &d_out, &mut grad);

        if lambda == 0.0 {
            continue;
        }
        if let Some((pos, neg)) = &s.triplet {
            check_dims(dim, pos.len())?;
            check_dims(dim, neg.len())?;
            let pp = net.pass(pos);
            let pn = net.pass(neg);
            let arg = margin + sq_dist(&pp.out, &s.target_user) - sq_dist(&pn.out, &s.target_user);
            if arg > 0.0 {
                unsup += arg;
                for k in 0..dim {
                    d_out[k] = lambda * 2.0 * (pp.out[k] - s.target_user[k]);
                }
                net.backward(pos, &pp, &d_out, &mut grad);
                for k in 0..dim {
                    d_out[k] = -lambda * 2.0 * (pn.out[k] - s.target_user[k]);
                }
                net.backward(neg, &pn, &d_out, &mut grad);
            }
        }
    }
    Ok(BatchLoss {
        supervised: sup,
        unsupervised: unsup,
        total: total_mapping_loss(sup, unsup, lambda),
        grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    /// Regression on overlapping users only.
    SupervisedOnly,
    SemiSupervised,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapTrainConfig {
    pub lambda: f64,
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub mode: MapMode,
    pub patience: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for MapTrainConfig {
    fn default() -> Self {
        MapTrainConfig {
            lambda: 0.5,
            margin: 1.0,
            lr: 0.001,
            epochs: 500,
            batch_size: 256,
            mode: MapMode::SemiSupervised,
            patience: 30,
            eval_every: 5,
            seed: 0,
        }
    }
}

impl MapTrainConfig {
    /// Weight of the unsupervised term actually used in training.
    pub fn effective_lambda(&self) -> f64 {
        match self.mode {
            MapMode::SupervisedOnly => 0.0,
            MapMode::SemiSupervised => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("mapping lr and batch size must be positive".into()));
        }
        Ok(())
    }
}

pub type MapValidationHook<'a> = &'a mut dyn FnMut(&MappingNetwork) -> Result<f64>;

struct Anchor {
    source_idx: usize,
    target_idx: usize,
}

/// Trains the mapping on the scenario's training overlap users.
///
/// `source` must be the space trained on `scenario.source`. Random draws
/// come from three independent streams (initialisation, batch order,
/// triplet sampling), so the unsupervised term never perturbs the
/// supervised schedule.
pub fn train_mapping(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    scenario: &CrossDomainScenario,
    cfg: &MapTrainConfig,
    mut hook: Option<MapValidationHook<'_>>,
) -> Result<Trained<MappingNetwork>> {
    cfg.validate()?;
    let dim = source.dim();
    check_dims(dim, target.dim())?;
    if source.user_ids.as_slice() != scenario.source.user_ids()
        || source.item_ids.as_slice() != scenario.source.item_ids()
    {
        return Err(Error::IndexMismatch(
            "source space was not trained on the scenario's source domain".into(),
        ));
    }
    if scenario.train_overlap_users.is_empty() {
        return Err(Error::NoOverlapUsers);
    }
    let target_index: std::collections::HashMap<&str, usize> = target
        .user_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let test_users: std::collections::HashSet<&str> =
        scenario.test_cases.iter().map(|c| c.user.as_str()).collect();

    let mut anchors = Vec::with_capacity(scenario.train_overlap_users.len());
    for user in &scenario.train_overlap_users {
        if test_users.contains(user.as_str()) {
            return Err(Error::IndexMismatch(format!(
                "test user {user} listed as a training overlap user"
            )));
        }
        let source_idx = scenario
            .source
            .user_idx(user)
            .ok_or_else(|| Error::UnknownUser(user.clone()))?;
        let target_idx = *target_index
            .get(user.as_str())
            .ok_or_else(|| Error::UnknownUser(user.clone()))?;
        anchors.push(Anchor {
            source_idx,
            target_idx,
        });
    }

    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(s);
        r
    };
    let mut init_rng = stream(0);
    let mut order_rng = stream(1);
    let mut triplet_rng = stream(2);

    let lambda = cfg.effective_lambda();
    let n_src_items = scenario.source.n_items();
    let mut net = MappingNetwork::init(dim, &mut init_rng);
    let mut opts: Vec<Adam> = net
        .params()
        .iter()
        .map(|p| Adam::new(p.len(), AdamParams::with_lr(cfg.lr)))
        .collect();

    let mut order: Vec<usize> = (0..anchors.len()).collect();
    let mut epoch_losses = Vec::new();
    let mut best: Option<(f64, usize, MappingNetwork)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<MapSample> = chunk
                .iter()
                .map(|&a| {
                    let a = &anchors[a];
                    let triplet = if lambda > 0.0 {
                        let items = scenario.source.items_of(a.source_idx);
                        if items.len() < n_src_items {
                            let pos = items[triplet_rng.gen_range(0..items.len())];
                            let neg = loop {
                                let k = triplet_rng.gen_range(0..n_src_items);
                                if items.binary_search(&k).is_err() {
                                    break k;
                                }
                            };
                            Some((source.item(pos).to_vec(), source.item(neg).to_vec()))
                        } else {
                            None
                        }
                    } else {
                        None
                    };
                    MapSample {
                        source_user: source.user(a.source_idx).to_vec(),
                        target_user: target.user(a.target_idx).to_vec(),
                        triplet,
                    }
                })
                .collect();
            let step = batch_loss_and_grad(&net, &batch, lambda, cfg.margin)?;
            epoch_total += step.total;
            for ((opt, p), g) in opts.iter_mut().zip(net.params_mut()).zip(step.grad.params()) {
                opt.step(p, g);
            }
        }
        let mean = epoch_total / anchors.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        epoch_losses.push(mean);

        if let Some(hook) = hook.as_mut() {
            if epoch % cfg.eval_every.max(1) == 0 || epoch == cfg.epochs {
                let score = hook(&net)?;
                log::debug!("mapping epoch {epoch}: loss {mean:.5} validation {score:.4}");
                match &best {
                    Some((b, ..)) if score <= *b => {}
                    _ => best = Some((score, epoch, net.clone())),
                }
                if epoch - best.as_ref().map_or(epoch, |b| b.1) >= cfg.patience {
                    break;
                }
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, epoch),
        None => (net, epoch_losses.len()),
    };
    Ok(Trained {
        model,
        epoch_losses,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn constant_net(b2: &[f64]) -> MappingNetwork {
        let mut net = MappingNetwork::zeros(b2.len());
        net.b2 = Array1::from(b2.to_vec());
        net
    }

    #[test]
    fn zero_network_maps_to_zero() {
        let net = MappingNetwork::zeros(3);
        assert_eq!(net.forward(&[0.3, -2.0, 5.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn constant_network_inside_ball() {
        let net = constant_net(&[0.3, 0.4]);
        assert_eq!(net.forward(&[9.0, -9.0]).unwrap(), vec![0.3, 0.4]);
    }

    #[test]
    fn constant_network_projected() {
        let net = constant_net(&[1.2, 1.6]);
        let y = net.forward(&[0.1, 0.2]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-12 && (y[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn forward_checks_dimension() {
        assert!(matches!(
            MappingNetwork::zeros(2).forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn supervised_examples() {
        let zero = MappingNetwork::zeros(2);
        let perfect = vec![(vec![5.0, 5.0], vec![0.0, 0.0])];
        assert_eq!(supervised_loss(&zero, &perfect).unwrap(), 0.0);
        let one = vec![(vec![0.2, 0.1], vec![1.0, 0.0])];
        assert!((supervised_loss(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        let two = vec![(vec![0.0, 0.0], vec![1.0, 0.0]), (vec![0.0, 0.0], vec![0.0, 2.0])];
        assert!((supervised_loss(&zero, &two).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(supervised_loss(&zero, &[]), Err(Error::EmptyBatch)));
    }

    /// Two-dimensional network computing `tanh` elementwise.
    fn tanh_net() -> MappingNetwork {
        let mut net = MappingNetwork::zeros(2);
        net.w1[[0, 0]] = 1.0;
        net.w1[[1, 1]] = 1.0;
        net.w2[[0, 0]] = 1.0;
        net.w2[[1, 1]] = 1.0;
        net
    }

    /// Input that `tanh_net` maps onto `y`.
    fn preimage(y: [f64; 2]) -> Vec<f64> {
        y.iter().map(|v| v.atanh()).collect()
    }

    #[test]
    fn unsupervised_examples() {
        let net = tanh_net();
        let origin = [0.0, 0.0];
        // mapped squared distances 0.1 and 0.4 from the target user
        let pos = preimage([0.1f64.sqrt(), 0.0]);
        let neg = preimage([0.0, 0.4f64.sqrt()]);
        let l = unsupervised_triplet_loss(&net, &pos, &neg, &origin, 1.0).unwrap();
        assert!((l - 0.7).abs() < 1e-9);

        let user = [-0.9, 0.0];
        let near = preimage([-0.9, 0.0]);
        let far = preimage([0.9, 0.0]);
        assert_eq!(unsupervised_triplet_loss(&net, &near, &far, &user, 1.0).unwrap(), 0.0);

        let a = preimage([0.5, 0.0]);
        let b = preimage([0.0, 0.5]);
        let l = unsupervised_triplet_loss(&net, &a, &b, &origin, 1.0).unwrap();
        assert!((l - 1.0).abs() < 1e-9);
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(total_mapping_loss(2.0, 4.0, 0.5), 4.0);
        assert_eq!(total_mapping_loss(2.0, 4.0, 0.0), 2.0);
        assert_eq!(total_mapping_loss(2.0, 0.0, 0.75), 2.0);
    }

    #[test]
    fn save_load_keeps_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = MappingNetwork::init(3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.txt");
        net.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 + 1 + 3 + 1);
        let back = MappingNetwork::load(&path).unwrap();
        for (a, b) in back.params().iter().zip(net.params()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-12));
            }
        }
    }
}
