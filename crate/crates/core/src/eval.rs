//! Leave-one-out ranking evaluation against sampled negatives.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{sample_negatives, user_stream, CrossDomainScenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub cutoffs: Vec<usize>,
    pub repeats: usize,
    pub negatives: usize,
    pub seed: u64,
    /// Score NDCG and MRR as zero beyond the cutoff. When off, the cutoff
    /// only applies to the hit ratio.
    pub apply_cutoff: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cutoffs: vec![10, 20],
            repeats: 5,
            negatives: 999,
            seed: 0,
            apply_cutoff: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 || self.negatives == 0 || self.cutoffs.is_empty() {
            return Err(Error::Config(
                "evaluation needs at least one repeat, one negative and one cutoff".into(),
            ));
        }
        if self.cutoffs.contains(&0) {
            return Err(Error::Config("cutoffs must be positive".into()));
        }
        Ok(())
    }
}

/// Scores target-domain candidates for a cold-start user.
pub trait Scorer: Sync {
    /// Whether larger scores rank first.
    fn higher_is_better(&self) -> bool;

    /// One score per candidate, in candidate order. Candidates are indices
    /// into the scenario's target item set.
    fn score(&self, user: &str, candidates: &[usize]) -> Result<Vec<f64>>;
}

/// Which held-out item plays the positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeldOut {
    Test,
    Validation,
}

/// 1-based position of `test_item` among scored candidates: one plus the
/// number of strictly better candidates plus equal-scored candidates with a
/// smaller index.
pub fn rank_of_test_item(scores: &[(usize, f64)], test_item: usize, higher_is_better: bool) -> Result<usize> {
    let target = scores
        .iter()
        .find(|(i, _)| *i == test_item)
        .map(|(_, s)| *s)
        .ok_or(Error::MissingTestItem(test_item))?;
    let better = scores
        .iter()
        .filter(|&&(i, s)| {
            if i == test_item {
                return false;
            }
            let strictly = if higher_is_better { s > target } else { s < target };
            strictly || (s == target && i < test_item)
        })
        .count();
    Ok(better + 1)
}

pub fn hit_at(p: usize, n: usize) -> f64 {
    if p <= n {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at(p: usize, n: usize) -> f64 {
    if p <= n {
        ndcg_uncut(p)
    } else {
        0.0
    }
}

pub fn mrr_at(p: usize, n: usize) -> f64 {
    if p <= n {
        1.0 / p as f64
    } else {
        0.0
    }
}

pub fn ndcg_uncut(p: usize) -> f64 {
    2f64.ln() / ((p + 1) as f64).ln()
}

/// Metric averages over test users, one entry per cutoff.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricValues {
    pub hit: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub mrr: Vec<f64>,
}

impl MetricValues {
    fn from_positions(positions: &[usize], cfg: &EvalConfig) -> Self {
        let n_users = positions.len().max(1) as f64;
        let avg = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
            cfg.cutoffs
                .iter()
                .map(|&n| positions.iter().map(|&p| f(p, n)).sum::<f64>() / n_users)
                .collect()
        };
        let cut = cfg.apply_cutoff;
        MetricValues {
            hit: avg(&hit_at),
            ndcg: avg(&|p, n| if cut { ndcg_at(p, n) } else { ndcg_uncut(p) }),
            mrr: avg(&|p, n| if cut { mrr_at(p, n) } else { 1.0 / p as f64 }),
        }
    }

    fn mean_of(all: &[MetricValues]) -> Self {
        let k = all[0].hit.len();
        let n = all.len() as f64;
        let mean = |get: fn(&MetricValues) -> &Vec<f64>| -> Vec<f64> {
            (0..k).map(|c| all.iter().map(|m| get(m)[c]).sum::<f64>() / n).collect()
        };
        MetricValues {
            hit: mean(|m| &m.hit),
            ndcg: mean(|m| &m.ndcg),
            mrr: mean(|m| &m.mrr),
        }
    }

    /// `(name, values)` in report order.
    pub fn named(&self) -> [(&'static str, &[f64]); 3] {
        [("H", &self.hit), ("N", &self.ndcg), ("M", &self.mrr)]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    pub users: Vec<String>,
    pub per_repeat: Vec<MetricValues>,
    /// Hit position of every user in every repeat.
    pub positions: Vec<Vec<usize>>,
    pub mean: MetricValues,
}

impl EvalReport {
    /// Mean value of a metric at a cutoff, if that cutoff was evaluated.
    pub fn mean_at(&self, metric: &str, cutoff: usize) -> Option<f64> {
        let c = self.cutoffs.iter().position(|&n| n == cutoff)?;
        self.mean
            .named()
            .iter()
            .find(|(name, _)| *name == metric)
            .map(|(_, v)| v[c])
    }
}

/// Evaluates the scorer on every test user with the held-out test item.
pub fn evaluate(scorer: &dyn Scorer, scenario: &CrossDomainScenario, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate_held_out(scorer, scenario, cfg, HeldOut::Test)
}

/// Per repeat `r`, each test user ranks its positive against `negatives`
/// fresh items drawn from the stream `(seed, r, user position)`. Negatives
/// never include any of the user's known target interactions.
pub fn evaluate_held_out(
    scorer: &dyn Scorer,
    scenario: &CrossDomainScenario,
    cfg: &EvalConfig,
    which: HeldOut,
) -> Result<EvalReport> {
    cfg.validate()?;
    let cases = &scenario.test_cases;
    if cases.is_empty() {
        return Err(Error::DegenerateScenario("scenario has no test users".into()));
    }
    let higher = scorer.higher_is_better();
    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    let mut positions = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let pos: Vec<usize> = cases
            .par_iter()
            .enumerate()
            .map(|(k, case)| {
                let positive = match which {
                    HeldOut::Test => case.test_item,
                    HeldOut::Validation => case.valid_item,
                };
                let mut rng = user_stream(cfg.seed, r as u64, k as u64);
                let negs = sample_negatives(
                    &scenario.target,
                    &case.user,
                    &case.known_positives(),
                    cfg.negatives,
                    &mut rng,
                )?;
                let mut candidates = Vec::with_capacity(negs.len() + 1);
                candidates.push(positive);
                candidates.extend(negs);
                let scores = scorer
                    .score(&case.user, &candidates)
                    .map_err(|_| Error::ScorerFailure(case.user.clone()))?;
                if scores.len() != candidates.len() {
                    return Err(Error::ScorerFailure(case.user.clone()));
                }
                let scored: Vec<(usize, f64)> = candidates.into_iter().zip(scores).collect();
                rank_of_test_item(&scored, positive, higher)
            })
            .collect::<Result<_>>()?;
        per_repeat.push(MetricValues::from_positions(&pos, cfg));
        positions.push(pos);
    }
    Ok(EvalReport {
        cutoffs: cfg.cutoffs.clone(),
        users: cases.iter().map(|c| c.user.clone()).collect(),
        mean: MetricValues::mean_of(&per_repeat),
        per_repeat,
        positions,
    })
}

/// Report rows `method phi repeat metric N value`, repeats first, then the
/// averaged block with repeat `mean`.
pub fn report_tsv(method: &str, phi: f64, report: &EvalReport) -> String {
    let mut out = String::from("method\tphi\trepeat\tmetric\tN\tvalue\n");
    let mut block = |repeat: &str, values: &MetricValues| {
        for (name, vals) in values.named() {
            for (n, v) in report.cutoffs.iter().zip(vals) {
                writeln!(out, "{method}\t{phi}\t{repeat}\t{name}@{n}\t{n}\t{v:.6}").unwrap();
            }
        }
    };
    for (r, values) in report.per_repeat.iter().enumerate() {
        block(&r.to_string(), values);
    }
    block("mean", &report.mean);
    out
}

/// Human-readable summary table of averaged metrics.
pub fn report_table(rows: &[(String, f64, &EvalReport)]) -> String {
    let Some((_, _, first)) = rows.first() else {
        return String::new();
    };
    let mut out = format!("{:<14}{:>6}", "method", "phi");
    for name in ["H", "N", "M"] {
        for n in &first.cutoffs {
            write!(out, "{:>9}", format!("{name}@{n}")).unwrap();
        }
    }
    out.push('\n');
    for (method, phi, report) in rows {
        write!(out, "{method:<14}{phi:>6}").unwrap();
        for (_, vals) in report.mean.named() {
            for v in vals {
                write!(out, "{v:>9.4}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}
