//! Per-domain user/item embeddings trained with either a metric-space
//! triplet hinge loss or the BPR pairwise loss.

mod io;
mod loss;
mod train;

use ndarray::Array2;

pub use io::{read_vectors, write_vectors, VectorFile};
pub(crate) use io::fmt_float as io_fmt_float;
pub use loss::{bpr_triplet_grad, bpr_triplet_loss, cml_triplet_grad, cml_triplet_loss, TripletGrad};
pub use train::{train_embeddings, EmbedTrainConfig, ValidationHook};

use crate::error::{Error, Result};

/// Scoring geometry of an embedding space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Preference falls with squared Euclidean distance; rows live in the unit ball.
    Metric,
    /// Preference is the inner product.
    InnerProduct,
}

impl SpaceKind {
    pub fn label(self) -> &'static str {
        match self {
            SpaceKind::Metric => "metric",
            SpaceKind::InnerProduct => "inner",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, SpaceKind::InnerProduct)
    }

    /// Raw score of `item` for `query`: a squared distance for metric
    /// spaces, a dot product otherwise.
    pub fn score(self, query: &[f64], item: &[f64]) -> f64 {
        match self {
            SpaceKind::Metric => sq_dist(query, item),
            SpaceKind::InnerProduct => dot(query, item),
        }
    }
}

/// Learned user and item vectors of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub kind: SpaceKind,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    /// `|U| x K`
    pub users: Array2<f64>,
    /// `|I| x K`
    pub items: Array2<f64>,
}

impl EmbeddingSpace {
    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    pub fn user(&self, idx: usize) -> &[f64] {
        row(&self.users, idx)
    }

    pub fn item(&self, idx: usize) -> &[f64] {
        row(&self.items, idx)
    }

    /// Largest row norm over users and items.
    pub fn max_row_norm(&self) -> f64 {
        self.users
            .rows()
            .into_iter()
            .chain(self.items.rows())
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn row(m: &Array2<f64>, idx: usize) -> &[f64] {
    let cols = m.ncols();
    let flat = m.as_slice().expect("standard layout");
    &flat[idx * cols..(idx + 1) * cols]
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Squared Euclidean distance.
pub fn distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    Ok(sq_dist(u, v))
}

/// Scales `x` back onto the unit ball: `x / max(1, ||x||)`.
pub fn project_unit_ball(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut out = x.to_vec();
    project_in_place(&mut out);
    Ok(out)
}

pub(crate) fn project_in_place(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 1.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

pub(crate) fn project_row(m: &mut Array2<f64>, idx: usize) {
    let mut r = m.row_mut(idx);
    let norm = r.dot(&r).sqrt();
    if norm > 1.0 {
        r.mapv_inplace(|v| v / norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(distance(&[0.7, -0.2], &[0.7, -0.2]).unwrap(), 0.0);
        assert_eq!(distance(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(
            distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let p = project_unit_ball(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.8).abs() < 1e-12);
        assert_eq!(project_unit_ball(&[0.3, 0.4]).unwrap(), vec![0.3, 0.4]);
        assert_eq!(project_unit_ball(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            project_unit_ball(&[f64::NAN, 0.0]),
            Err(Error::NonFiniteInput)
        ));
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_non_expansive(x in prop::collection::vec(-10.0f64..10.0, 1..8)) {
            let p = project_unit_ball(&x).unwrap();
            let pp = project_unit_ball(&p).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
            let n = dot(&x, &x).sqrt();
            let np = dot(&p, &p).sqrt();
            prop_assert!(np <= n.min(1.0) + 1e-12);
        }
    }
}
