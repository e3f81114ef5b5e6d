//! Synthetic two-domain benchmark.
//!
//! Every user gets a latent taste vector on the unit sphere; every item of
//! each domain gets its own point on the sphere. A user interacts with the
//! items nearest to its taste vector, the same number for every user of a
//! domain, chosen so the domain density matches the request. Overlapping
//! users share one taste vector across both domains.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::InteractionSet;
use crate::embed::sq_dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Distinct users over both domains.
    pub n_users: usize,
    pub n_source_items: usize,
    pub n_target_items: usize,
    pub k_true: usize,
    /// Fraction of users present in both domains. The rest is split evenly
    /// between source-only and target-only users.
    pub overlap_fraction: f64,
    /// Interactions / (domain users x domain items), per domain.
    pub density: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_users: 2000,
            n_source_items: 1500,
            n_target_items: 1500,
            k_true: 8,
            overlap_fraction: 0.3,
            density: 0.004,
            seed: 0,
        }
    }
}

fn sphere_point(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn per_user_count(density: f64, n_items: usize) -> Result<usize> {
    let c = (density * n_items as f64).round() as usize;
    if c < 2 || c >= n_items {
        return Err(Error::InfeasibleDensity(format!(
            "density {density} over {n_items} items gives {c} interactions per user; need 2..{n_items}"
        )));
    }
    Ok(c)
}

fn nearest(taste: &[f64], items: &[Vec<f64>], count: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = items
        .iter()
        .enumerate()
        .map(|(i, v)| (sq_dist(taste, v), i))
        .collect();
    order.select_nth_unstable_by(count - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(count);
    order.into_iter().map(|(_, i)| i).collect()
}

/// Generates `(source, target)` interaction sets.
pub fn generate_synthetic(p: &SynthParams) -> Result<(InteractionSet, InteractionSet)> {
    if p.n_users == 0 || p.n_source_items == 0 || p.n_target_items == 0 || p.k_true == 0 {
        return Err(Error::Config("synthetic counts must be positive".into()));
    }
    if !(p.overlap_fraction > 0.0 && p.overlap_fraction <= 1.0) {
        return Err(Error::Config("overlap fraction must lie in (0, 1]".into()));
    }
    if !(p.density > 0.0 && p.density < 1.0) {
        return Err(Error::InfeasibleDensity(format!("density {} outside (0, 1)", p.density)));
    }
    let c_src = per_user_count(p.density, p.n_source_items)?;
    let c_tgt = per_user_count(p.density, p.n_target_items)?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let tastes: Vec<Vec<f64>> = (0..p.n_users).map(|_| sphere_point(p.k_true, &mut rng)).collect();
    let src_items: Vec<Vec<f64>> = (0..p.n_source_items).map(|_| sphere_point(p.k_true, &mut rng)).collect();
    let tgt_items: Vec<Vec<f64>> = (0..p.n_target_items).map(|_| sphere_point(p.k_true, &mut rng)).collect();

    let n_overlap = ((p.overlap_fraction * p.n_users as f64).round() as usize).max(1);
    let n_rest = p.n_users - n_overlap;
    let n_source_only = n_rest.div_ceil(2);

    let mut src_pairs = Vec::new();
    let mut tgt_pairs = Vec::new();
    for (u, taste) in tastes.iter().enumerate() {
        let id = format!("u{u:05}");
        let in_source = u < n_overlap + n_source_only;
        let in_target = u < n_overlap || u >= n_overlap + n_source_only;
        if in_source {
            for i in nearest(taste, &src_items, c_src) {
                src_pairs.push((id.clone(), format!("s{i:05}")));
            }
        }
        if in_target {
            for i in nearest(taste, &tgt_items, c_tgt) {
                tgt_pairs.push((id.clone(), format!("t{i:05}")));
            }
        }
    }
    Ok((InteractionSet::from_pairs(src_pairs), InteractionSet::from_pairs(tgt_pairs)))
}
