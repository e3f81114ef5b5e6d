//! Cold-start inference: synchronous neighbour averaging on the source
//! interaction graph, mapping into the target space, and top-N retrieval.


use ndarray::Array2;

use crate::data::InteractionSet;
use crate::embed::{check_dims, row, EmbeddingSpace, SpaceKind};
use crate::error::{Error, Result};
use crate::mapper::MappingNetwork;

/// Source-space vectors after `hop` rounds of neighbour averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedVectors {
    pub hop: usize,
    pub users: Array2<f64>,
    pub items: Array2<f64>,
}

impl AggregatedVectors {
    pub fn initial(space: &EmbeddingSpace) -> Self {
        AggregatedVectors {
            hop: 0,
            users: space.users.clone(),
            items: space.items.clone(),
        }
    }

    pub fn user(&self, idx: usize) -> &[f64] {
        row(&self.users, idx)
    }

    pub fn item(&self, idx: usize) -> &[f64] {
        row(&self.items, idx)
    }
}

/// One synchronous aggregation round: every entity becomes the mean of
/// itself and its neighbours, all read from the previous hop.
pub fn aggregate_step(prev: &AggregatedVectors, source: &InteractionSet) -> Result<AggregatedVectors> {
    if prev.users.nrows() != source.n_users() || prev.items.nrows() != source.n_items() {
        return Err(Error::IndexMismatch(format!(
            "vectors cover {} users / {} items, graph has {} / {}",
            prev.users.nrows(),
            prev.items.nrows(),
            source.n_users(),
            source.n_items()
        )));
    }
    let mut users = prev.users.clone();
    let mut items = prev.items.clone();
    for (u, mut out) in users.rows_mut().into_iter().enumerate() {
        let neigh = source.items_of(u);
        for &i in neigh {
            out += &prev.items.row(i);
        }
        out /= (neigh.len() + 1) as f64;
    }
    for (i, mut out) in items.rows_mut().into_iter().enumerate() {
        let neigh = source.users_of(i);
        for &u in neigh {
            out += &prev.users.row(u);
        }
        out /= (neigh.len() + 1) as f64;
    }
    Ok(AggregatedVectors {
        hop: prev.hop + 1,
        users,
        items,
    })
}

/// Aggregated vectors of every source entity after `hops` rounds.
pub fn aggregate(space: &EmbeddingSpace, source: &InteractionSet, hops: usize) -> Result<AggregatedVectors> {
    let mut agg = AggregatedVectors::initial(space);
    for _ in 0..hops {
        agg = aggregate_step(&agg, source)?;
    }
    Ok(agg)
}

/// The `hops`-round aggregated source vector of a single user.
pub fn multi_hop_user(
    space: &EmbeddingSpace,
    source: &InteractionSet,
    user: &str,
    hops: usize,
) -> Result<Vec<f64>> {
    let idx = source
        .user_idx(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    Ok(aggregate(space, source, hops)?.user(idx).to_vec())
}

/// Target-space vector of a cold-start user from its aggregated source vector.
pub fn infer_cold_start(net: &MappingNetwork, agg_vector: &[f64]) -> Result<Vec<f64>> {
    net.forward(agg_vector)
}

/// Orders `(item, score)` pairs best first; ties go to the smaller item index.
pub fn rank_order(scored: &mut [(usize, f64)], higher_is_better: bool) {
    // -0.0 and 0.0 must tie, so compare by value; NaN falls back to total order
    let cmp = |x: f64, y: f64| x.partial_cmp(&y).unwrap_or_else(|| x.total_cmp(&y));
    scored.sort_by(|a, b| {
        let by_score = if higher_is_better {
            cmp(b.1, a.1)
        } else {
            cmp(a.1, b.1)
        };
        by_score.then(a.0.cmp(&b.0))
    });
}

fn top_n(mut scored: Vec<(usize, f64)>, higher_is_better: bool, n: usize) -> Vec<usize> {
    rank_order(&mut scored, higher_is_better);
    scored.into_iter().take(n).map(|(i, _)| i).collect()
}

/// Top `n` candidates for `query`: nearest first in metric spaces, largest
/// dot product first in inner-product spaces.
pub fn recommend_topn(
    target: &EmbeddingSpace,
    query: &[f64],
    candidates: &[usize],
    n: usize,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    check_dims(target.dim(), query.len())?;
    let scored = candidates
        .iter()
        .map(|&i| (i, target.kind.score(query, target.item(i))))
        .collect();
    Ok(top_n(scored, target.kind == SpaceKind::InnerProduct, n))
}

/// Candidates ordered by training interaction count, most popular first.
pub fn itempop_rank(target: &InteractionSet, candidates: &[usize], n: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let scored = candidates
        .iter()
        .map(|&i| (i, target.users_of(i).len() as f64))
        .collect();
    Ok(top_n(scored, true, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn space(kind: SpaceKind, users: Array2<f64>, items: Array2<f64>) -> EmbeddingSpace {
        EmbeddingSpace {
            kind,
            user_ids: (0..users.nrows()).map(|i| format!("u{i}")).collect(),
            item_ids: (0..items.nrows()).map(|i| format!("i{i}")).collect(),
            users,
            items,
        }
    }

    #[test]
    fn user_step_by_hand() {
        let g = InteractionSet::from_pairs([("u0", "i0"), ("u0", "i1")]);
        let s = space(SpaceKind::Metric, array![[1.0, 0.0]], array![[0.0, 1.0], [0.0, -1.0]]);
        let next = aggregate_step(&AggregatedVectors::initial(&s), &g).unwrap();
        assert!((next.user(0)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(next.user(0)[1], 0.0);
        assert_eq!(next.hop, 1);
    }

    #[test]
    fn item_step_by_hand() {
        let g = InteractionSet::from_pairs([("u0", "i0"), ("u1", "i0"), ("u2", "i0")]);
        let s = space(
            SpaceKind::Metric,
            array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
            array![[0.0, 0.0]],
        );
        let next = aggregate_step(&AggregatedVectors::initial(&s), &g).unwrap();
        assert_eq!(next.item(0), &[0.0, 0.25]);
    }

    #[test]
    fn isolated_entity_unchanged() {
        let g = InteractionSet::with_extra_items([("u0", "i0")], ["lonely"]);
        let s = space(SpaceKind::Metric, array![[0.5, 0.5]], array![[0.1, 0.2], [0.3, -0.4]]);
        let next = aggregate_step(&AggregatedVectors::initial(&s), &g).unwrap();
        let lonely = g.item_idx("lonely").unwrap();
        assert_eq!(next.item(lonely), s.item(lonely));
    }

    #[test]
    fn shape_mismatch() {
        let g = InteractionSet::from_pairs([("u0", "i0"), ("u1", "i0")]);
        let s = space(SpaceKind::Metric, array![[0.5, 0.5]], array![[0.1, 0.2]]);
        assert!(matches!(
            aggregate_step(&AggregatedVectors::initial(&s), &g),
            Err(Error::IndexMismatch(_))
        ));
    }

    #[test]
    fn zero_hops_is_identity_and_closed_form_one_hop() {
        let g = InteractionSet::from_pairs([("u0", "i0"), ("u0", "i1"), ("u0", "i2")]);
        let c = [0.2, -0.1];
        let s = space(
            SpaceKind::Metric,
            array![[0.6, 0.3]],
            array![[0.2, -0.1], [0.2, -0.1], [0.2, -0.1]],
        );
        assert_eq!(multi_hop_user(&s, &g, "u0", 0).unwrap(), vec![0.6, 0.3]);
        let one = multi_hop_user(&s, &g, "u0", 1).unwrap();
        for k in 0..2 {
            let expected = (s.user(0)[k] + 3.0 * c[k]) / 4.0;
            assert!((one[k] - expected).abs() < 1e-15);
        }
        assert!(matches!(
            multi_hop_user(&s, &g, "ghost", 1),
            Err(Error::UnknownUser(_))
        ));
    }

    #[test]
    fn topn_examples() {
        // squared distances 0.1, 0.3, 0.2 from the origin
        let s = space(
            SpaceKind::Metric,
            array![[0.0]],
            array![[0.1f64.sqrt()], [0.3f64.sqrt()], [0.2f64.sqrt()]],
        );
        assert_eq!(recommend_topn(&s, &[0.0], &[0, 1, 2], 3).unwrap(), vec![0, 2, 1]);

        let s = space(SpaceKind::InnerProduct, array![[1.0]], array![[0.9], [0.1]]);
        assert_eq!(recommend_topn(&s, &[1.0], &[0, 1], 2).unwrap(), vec![0, 1]);

        let items = Array2::from_elem((8, 1), 0.5);
        let s = space(SpaceKind::Metric, array![[0.0]], items);
        assert_eq!(recommend_topn(&s, &[0.0], &[7, 3], 2).unwrap(), vec![3, 7]);
        assert!(matches!(recommend_topn(&s, &[0.0], &[], 1), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn itempop_examples() {
        let mut pairs = Vec::new();
        for (item, count) in [("A", 5), ("B", 2), ("C", 7)] {
            for u in 0..count {
                pairs.push((format!("u{u}"), item.to_string()));
            }
        }
        let g = InteractionSet::with_extra_items(pairs, ["D"]);
        let idx = |x: &str| g.item_idx(x).unwrap();
        let (a, b, c, d) = (idx("A"), idx("B"), idx("C"), idx("D"));
        assert_eq!(itempop_rank(&g, &[a, b, c], 3).unwrap(), vec![c, a, b]);
        assert_eq!(itempop_rank(&g, &[d, b, c, a], 4).unwrap(), vec![c, a, b, d]);

        let flat = InteractionSet::from_pairs([("u", "x"), ("u", "y"), ("u", "z")]);
        assert_eq!(itempop_rank(&flat, &[2, 0, 1], 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn naive_inference_is_plain_forward() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let net = MappingNetwork::init(2, &mut rng);
        let g = InteractionSet::from_pairs([("u0", "i0")]);
        let s = space(SpaceKind::Metric, array![[0.4, -0.7]], array![[0.9, 0.1]]);
        let agg = multi_hop_user(&s, &g, "u0", 0).unwrap();
        let inferred = infer_cold_start(&net, &agg).unwrap();
        assert_eq!(inferred, net.forward(s.user(0)).unwrap());
        assert_eq!(infer_cold_start(&MappingNetwork::zeros(2), &agg).unwrap(), vec![0.0, 0.0]);
        assert!(crate::embed::distance(&inferred, &[0.0, 0.0]).unwrap() <= 1.0 + 1e-6);
    }
}
