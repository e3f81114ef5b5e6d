//! Cross-domain scenario construction: iterative filtering, cold-start test
//! user selection with leave-one-out hold-outs, and the fraction of
//! overlapping users exposed to mapping training.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::interactions::{parse_interactions, InteractionSet};
use crate::error::{Error, Result};

/// Minimum interaction counts used when filtering raw domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterThresholds {
    /// Applied to overlapping users, in each domain separately.
    pub min_overlap_interactions: usize,
    /// Applied to non-overlapping users and to items.
    pub min_other_interactions: usize,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            min_overlap_interactions: 10,
            min_other_interactions: 20,
        }
    }
}

/// Seeds and fractions that fully determine a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSeedConfig {
    pub seed: u64,
    /// Fraction of overlapping users turned into cold-start test users.
    pub test_fraction: f64,
    /// Fraction of the remaining overlapping users used as mapping labels.
    pub phi: f64,
}

impl Default for SplitSeedConfig {
    fn default() -> Self {
        SplitSeedConfig {
            seed: 0,
            test_fraction: 0.5,
            phi: 1.0,
        }
    }
}

/// One cold-start user with its held-out target-domain items.
///
/// Item fields are indices into the scenario's target item set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub user: String,
    pub test_item: usize,
    pub valid_item: usize,
    /// The rest of the user's target history. Never used for training, only
    /// kept out of negative samples.
    pub withheld: Vec<usize>,
}

impl TestCase {
    /// Every target item the user is known to have interacted with.
    pub fn known_positives(&self) -> Vec<usize> {
        let mut all = Vec::with_capacity(self.withheld.len() + 2);
        all.push(self.test_item);
        all.push(self.valid_item);
        all.extend_from_slice(&self.withheld);
        all
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossDomainScenario {
    pub source: InteractionSet,
    /// Target-domain training interactions. Test users are absent; the item
    /// set still contains every target item.
    pub target: InteractionSet,
    /// Users present in both filtered domains, sorted.
    pub overlap_users: Vec<String>,
    /// Sorted by user id.
    pub test_cases: Vec<TestCase>,
    /// Sorted by user id.
    pub train_overlap_users: Vec<String>,
    pub split: SplitSeedConfig,
    pub thresholds: FilterThresholds,
}

type Pairs = Vec<(String, String)>;

fn counts<'a>(keys: impl Iterator<Item = &'a str>) -> HashMap<&'a str, usize> {
    let mut map = HashMap::new();
    for k in keys {
        *map.entry(k).or_insert(0) += 1;
    }
    map
}

/// Removes overlapping users with too few interactions in either domain,
/// then non-overlapping users and items with too few interactions, until
/// nothing changes.
pub fn filter_to_fixed_point(
    mut source: Pairs,
    mut target: Pairs,
    thresholds: FilterThresholds,
) -> (Pairs, Pairs) {
    let FilterThresholds {
        min_overlap_interactions: min_ov,
        min_other_interactions: min_other,
    } = thresholds;
    loop {
        let (drop_users, drop_src_items, drop_tgt_items) = {
            let su = counts(source.iter().map(|(u, _)| u.as_str()));
            let tu = counts(target.iter().map(|(u, _)| u.as_str()));
            let si = counts(source.iter().map(|(_, i)| i.as_str()));
            let ti = counts(target.iter().map(|(_, i)| i.as_str()));

            let mut drop_users: HashSet<String> = HashSet::new();
            for (&u, &cs) in &su {
                match tu.get(u) {
                    Some(&ct) if cs < min_ov || ct < min_ov => {
                        drop_users.insert(u.to_string());
                    }
                    None if cs < min_other => {
                        drop_users.insert(u.to_string());
                    }
                    _ => {}
                }
            }
            for (&u, &ct) in &tu {
                if !su.contains_key(u) && ct < min_other {
                    drop_users.insert(u.to_string());
                }
            }
            let low = |m: &HashMap<&str, usize>| -> HashSet<String> {
                m.iter()
                    .filter(|(_, &c)| c < min_other)
                    .map(|(k, _)| k.to_string())
                    .collect()
            };
            (drop_users, low(&si), low(&ti))
        };
        if drop_users.is_empty() && drop_src_items.is_empty() && drop_tgt_items.is_empty() {
            return (source, target);
        }
        source.retain(|(u, i)| !drop_users.contains(u) && !drop_src_items.contains(i));
        target.retain(|(u, i)| !drop_users.contains(u) && !drop_tgt_items.contains(i));
    }
}

fn round_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Filters both domains, picks cold-start test users with held-out test and
/// validation items, and selects the `phi` fraction of training overlap users.
pub fn build_scenario(
    source: &InteractionSet,
    target: &InteractionSet,
    thresholds: FilterThresholds,
    cfg: &SplitSeedConfig,
) -> Result<CrossDomainScenario> {
    if !(cfg.phi > 0.0 && cfg.phi <= 1.0) {
        return Err(Error::Config(format!("phi must lie in (0, 1], got {}", cfg.phi)));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {}",
            cfg.test_fraction
        )));
    }
    let own = |set: &InteractionSet| -> Pairs {
        set.id_pairs()
            .map(|(u, i)| (u.to_string(), i.to_string()))
            .collect()
    };
    let (src_pairs, tgt_pairs) = filter_to_fixed_point(own(source), own(target), thresholds);
    let source = InteractionSet::from_pairs(src_pairs);
    let full_target = InteractionSet::from_pairs(tgt_pairs);

    let overlap_users: Vec<String> = source
        .user_ids()
        .iter()
        .filter(|u| full_target.user_idx(u).is_some())
        .cloned()
        .collect();
    if overlap_users.is_empty() {
        return Err(Error::NoOverlap);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffled = overlap_users.clone();
    shuffled.shuffle(&mut rng);

    let n_test = round_count(cfg.test_fraction, overlap_users.len());
    let target_count = |u: &str| full_target.items_of(full_target.user_idx(u).unwrap()).len();
    let chosen: BTreeSet<String> = shuffled
        .iter()
        .filter(|u| target_count(u) >= 2)
        .take(n_test)
        .cloned()
        .collect();
    if n_test > 0 && chosen.is_empty() {
        return Err(Error::DegenerateScenario(
            "no overlapping user has two target-domain interactions to hold out".into(),
        ));
    }

    let mut test_cases = Vec::with_capacity(chosen.len());
    for user in &chosen {
        let mut history = full_target.items_of(full_target.user_idx(user).unwrap()).to_vec();
        let t = rng.gen_range(0..history.len());
        let test_item = history.swap_remove(t);
        let v = rng.gen_range(0..history.len());
        let valid_item = history.swap_remove(v);
        history.sort_unstable();
        test_cases.push(TestCase {
            user: user.clone(),
            test_item,
            valid_item,
            withheld: history,
        });
    }

    let train_pairs = full_target
        .id_pairs()
        .filter(|(u, _)| !chosen.contains(*u))
        .map(|(u, i)| (u.to_string(), i.to_string()));
    let target = InteractionSet::with_extra_items(train_pairs, full_target.item_ids().iter().cloned());
    debug_assert_eq!(target.item_ids(), full_target.item_ids());

    let remaining: Vec<String> = shuffled.into_iter().filter(|u| !chosen.contains(u)).collect();
    let n_train = round_count(cfg.phi, remaining.len());
    let mut train_overlap_users: Vec<String> = remaining.into_iter().take(n_train).collect();
    train_overlap_users.sort();

    Ok(CrossDomainScenario {
        source,
        target,
        overlap_users,
        test_cases,
        train_overlap_users,
        split: *cfg,
        thresholds,
    })
}

/// Merges both domains into one interaction set with shared users and
/// disjoint items.
///
/// Source items get the prefix `s:` and target items `t:`, so all source
/// items sort first and target item `j` lands at unified index
/// `source.n_items() + j`.
pub fn build_unified(scenario: &CrossDomainScenario) -> InteractionSet {
    let src = scenario
        .source
        .id_pairs()
        .map(|(u, i)| (u.to_string(), format!("s:{i}")));
    let tgt = scenario
        .target
        .id_pairs()
        .map(|(u, i)| (u.to_string(), format!("t:{i}")));
    let extra = scenario
        .target
        .item_ids()
        .iter()
        .map(|i| format!("t:{i}"))
        .collect::<Vec<_>>();
    InteractionSet::with_extra_items(src.chain(tgt), extra)
}

impl CrossDomainScenario {
    pub fn overlap_index(&self) -> HashSet<&str> {
        self.overlap_users.iter().map(String::as_str).collect()
    }

    /// Writes the scenario directory: `source.tsv`, `target_train.tsv`,
    /// `overlap.txt`, `train_overlap.txt`, `test.tsv`, `withheld.tsv`, `meta`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.source.write_tsv(&dir.join("source.tsv"))?;
        self.target.write_tsv(&dir.join("target_train.tsv"))?;
        let lines = |ids: &[String]| ids.iter().map(|u| format!("{u}\n")).collect::<String>();
        write(dir, "overlap.txt", &lines(&self.overlap_users))?;
        write(dir, "train_overlap.txt", &lines(&self.train_overlap_users))?;

        let mut test = String::new();
        let mut withheld = String::new();
        for case in &self.test_cases {
            let id = |i: usize| self.target.item_id(i);
            writeln!(test, "{}\t{}\t{}", case.user, id(case.test_item), id(case.valid_item)).unwrap();
            for &i in &case.withheld {
                writeln!(withheld, "{}\t{}", case.user, id(i)).unwrap();
            }
        }
        write(dir, "test.tsv", &test)?;
        write(dir, "withheld.tsv", &withheld)?;
        write(dir, "meta", &self.meta())
    }

    fn meta(&self) -> String {
        format!(
            "phi={}\nseed={}\ntest_fraction={}\nmin_overlap_interactions={}\nmin_other_interactions={}\n",
            self.split.phi,
            self.split.seed,
            self.split.test_fraction,
            self.thresholds.min_overlap_interactions,
            self.thresholds.min_other_interactions
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        let id_lines = |text: String| -> Vec<String> {
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect()
        };

        let source = InteractionSet::from_pairs(parse_interactions(&read("source.tsv")?)?);
        let train_pairs = parse_interactions(&read("target_train.tsv")?)?;
        let withheld_pairs = parse_interactions(&read("withheld.tsv")?)?;

        let mut tests = Vec::new();
        for (n, line) in read("test.tsv")?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 3 {
                return Err(Error::MalformedLine {
                    line: n + 1,
                    reason: "expected user<TAB>test_item<TAB>valid_item".into(),
                });
            }
            tests.push((f[0].to_string(), f[1].to_string(), f[2].to_string()));
        }

        let extra = tests
            .iter()
            .flat_map(|(_, t, v)| [t.clone(), v.clone()])
            .chain(withheld_pairs.iter().map(|(_, i)| i.clone()))
            .collect::<Vec<_>>();
        let target = InteractionSet::with_extra_items(train_pairs, extra);

        let mut withheld: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (u, i) in &withheld_pairs {
            withheld
                .entry(u.as_str())
                .or_default()
                .push(target.item_idx(i).unwrap());
        }
        let mut test_cases: Vec<TestCase> = tests
            .iter()
            .map(|(u, t, v)| {
                let mut rest = withheld.remove(u.as_str()).unwrap_or_default();
                rest.sort_unstable();
                TestCase {
                    user: u.clone(),
                    test_item: target.item_idx(t).unwrap(),
                    valid_item: target.item_idx(v).unwrap(),
                    withheld: rest,
                }
            })
            .collect();
        test_cases.sort_by(|a, b| a.user.cmp(&b.user));

        let meta = parse_meta(&read("meta")?)?;
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Config(format!("scenario meta lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Config(format!("bad value for `{k}` in scenario meta")))
        };
        let split = SplitSeedConfig {
            seed: num("seed")? as u64,
            test_fraction: num("test_fraction")?,
            phi: num("phi")?,
        };
        let thresholds = FilterThresholds {
            min_overlap_interactions: num("min_overlap_interactions")? as usize,
            min_other_interactions: num("min_other_interactions")? as usize,
        };

        let mut overlap_users = id_lines(read("overlap.txt")?);
        overlap_users.sort();
        let mut train_overlap_users = id_lines(read("train_overlap.txt")?);
        train_overlap_users.sort();

        Ok(CrossDomainScenario {
            source,
            target,
            overlap_users,
            test_cases,
            train_overlap_users,
            split,
            thresholds,
        })
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(path, e))
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedLine {
            line: n + 1,
            reason: "expected key=value".into(),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}
