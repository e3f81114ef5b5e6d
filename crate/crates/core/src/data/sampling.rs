use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InteractionSet;
use crate::error::{Error, Result};

/// Independent random stream for one `(seed, repeat, user)` triple.
///
/// Streams never depend on the order in which users are processed, so
/// parallel and serial evaluation draw identical negatives.
pub fn user_stream(seed: u64, repeat: u64, user: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(repeat));
    rng.set_stream(user);
    rng
}

/// Draws `n` distinct items uniformly without replacement from the items of
/// `target` that `user` never interacted with and that are not in `exclude`.
///
/// A user unknown to `target` (a cold-start user) has no interactions there.
pub fn sample_negatives<R: Rng + ?Sized>(
    target: &InteractionSet,
    user: &str,
    exclude: &[usize],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut blocked = vec![false; target.n_items()];
    if let Some(u) = target.user_idx(user) {
        for &i in target.items_of(u) {
            blocked[i] = true;
        }
    }
    for &i in exclude {
        if i < blocked.len() {
            blocked[i] = true;
        }
    }
    let pool: Vec<usize> = (0..target.n_items()).filter(|&i| !blocked[i]).collect();
    if pool.len() < n {
        return Err(Error::InsufficientCandidates(pool.len()));
    }
    Ok(index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|k| pool[k])
        .collect())
}
