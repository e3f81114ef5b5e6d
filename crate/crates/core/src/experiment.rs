//! End-to-end experiments: configuration, dispatch over the seven methods,
//! artifact persistence and the reproduction manifest.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::coldstart::aggregate;
use crate::data::{
    build_scenario, build_unified, load_interactions, CrossDomainScenario, FilterThresholds,
    InteractionSet, SplitSeedConfig,
};
use crate::embed::{
    train_embeddings, write_vectors, EmbedTrainConfig, EmbeddingSpace, SpaceKind, VectorFile,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_held_out, report_tsv, EvalConfig, EvalReport, HeldOut, Scorer};
use crate::mapper::{train_mapping, MapMode, MapTrainConfig, MappingNetwork};
use crate::synth::{generate_synthetic, SynthParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ItemPop,
    Bpr,
    Cml,
    EmcdrBpr,
    EmcdrCml,
    SscdrNaive,
    Sscdr,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ItemPop,
        Method::Bpr,
        Method::Cml,
        Method::EmcdrBpr,
        Method::EmcdrCml,
        Method::SscdrNaive,
        Method::Sscdr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ItemPop => "ITEMPOP",
            Method::Bpr => "BPR",
            Method::Cml => "CML",
            Method::EmcdrBpr => "EMCDR-BPR",
            Method::EmcdrCml => "EMCDR-CML",
            Method::SscdrNaive => "SSCDR-naive",
            Method::Sscdr => "SSCDR",
        }
    }

    /// Methods that transfer users through a mapping network.
    pub fn uses_mapping(self) -> bool {
        matches!(
            self,
            Method::EmcdrBpr | Method::EmcdrCml | Method::SscdrNaive | Method::Sscdr
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}`; expected one of {}",
                    Method::ALL.map(Method::name).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { source: PathBuf, target: PathBuf },
    Scenario(PathBuf),
    Synthetic(SynthParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub method: Method,
    pub seed: u64,
    pub split: SplitSeedConfig,
    pub thresholds: FilterThresholds,
    pub embed: EmbedTrainConfig,
    pub map: MapTrainConfig,
    pub hops: usize,
    pub eval: EvalConfig,
    /// Select embedding (unified baselines) and mapping snapshots on
    /// validation H@N.
    pub early_stop: bool,
    pub out: Option<PathBuf>,
    /// Expected content hashes of input files, keyed by config key.
    pub expected_hashes: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SynthParams::default()),
            method: Method::Sscdr,
            seed: 0,
            split: SplitSeedConfig::default(),
            thresholds: FilterThresholds::default(),
            embed: EmbedTrainConfig::default(),
            map: MapTrainConfig::default(),
            hops: 2,
            eval: EvalConfig::default(),
            early_stop: false,
            out: None,
            expected_hashes: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// Builds a config from flat `key=value` pairs layered over the defaults.
    ///
    /// Unknown keys are rejected. Stage seeds follow `seed` unless set
    /// explicitly.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut synth = SynthParams::default();
        let mut synth_seed = None;
        let (mut source, mut target, mut scenario) = (None, None, None);
        let mut stage_seed: HashMap<&str, u64> = HashMap::new();

        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "method" => cfg.method = v.parse()?,
                "seed" => cfg.seed = parse(k, v)?,
                "phi" => cfg.split.phi = parse(k, v)?,
                "test_fraction" => cfg.split.test_fraction = parse(k, v)?,
                "hops" => cfg.hops = parse(k, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                "early_stop" => cfg.early_stop = parse_bool(k, v)?,
                "data.source" => source = Some(PathBuf::from(v)),
                "data.target" => target = Some(PathBuf::from(v)),
                "data.scenario" => scenario = Some(PathBuf::from(v)),
                "synth.users" => synth.n_users = parse(k, v)?,
                "synth.source_items" => synth.n_source_items = parse(k, v)?,
                "synth.target_items" => synth.n_target_items = parse(k, v)?,
                "synth.k_true" => synth.k_true = parse(k, v)?,
                "synth.overlap" => synth.overlap_fraction = parse(k, v)?,
                "synth.density" => synth.density = parse(k, v)?,
                "synth.seed" => synth_seed = Some(parse(k, v)?),
                "filter.min_overlap" => cfg.thresholds.min_overlap_interactions = parse(k, v)?,
                "filter.min_other" => cfg.thresholds.min_other_interactions = parse(k, v)?,
                "embed.dim" => cfg.embed.dim = parse(k, v)?,
                "embed.margin" => cfg.embed.margin = parse(k, v)?,
                "embed.lr" => cfg.embed.lr = parse(k, v)?,
                "embed.reg" => cfg.embed.reg = parse(k, v)?,
                "embed.epochs" => cfg.embed.epochs = parse(k, v)?,
                "embed.batch_size" => cfg.embed.batch_size = parse(k, v)?,
                "embed.patience" => cfg.embed.patience = parse(k, v)?,
                "embed.eval_every" => cfg.embed.eval_every = parse(k, v)?,
                "map.lambda" => cfg.map.lambda = parse(k, v)?,
                "map.margin" => cfg.map.margin = parse(k, v)?,
                "map.lr" => cfg.map.lr = parse(k, v)?,
                "map.epochs" => cfg.map.epochs = parse(k, v)?,
                "map.batch_size" => cfg.map.batch_size = parse(k, v)?,
                "map.patience" => cfg.map.patience = parse(k, v)?,
                "map.eval_every" => cfg.map.eval_every = parse(k, v)?,
                "eval.cutoffs" => {
                    cfg.eval.cutoffs = v
                        .split(',')
                        .map(|n| parse(k, n.trim()))
                        .collect::<Result<_>>()?
                }
                "eval.repeats" => cfg.eval.repeats = parse(k, v)?,
                "eval.negatives" => cfg.eval.negatives = parse(k, v)?,
                "eval.apply_cutoff" => cfg.eval.apply_cutoff = parse_bool(k, v)?,
                "split.seed" | "embed.seed" | "map.seed" | "eval.seed" => {
                    stage_seed.insert(k.split('.').next().unwrap(), parse(k, v)?);
                }
                key if key.starts_with("hash.") => {
                    cfg.expected_hashes
                        .insert(key["hash.".len()..].to_string(), v.to_string());
                }
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }

        let seed = cfg.seed;
        cfg.split.seed = *stage_seed.get("split").unwrap_or(&seed);
        cfg.embed.seed = *stage_seed.get("embed").unwrap_or(&seed.wrapping_add(1));
        cfg.map.seed = *stage_seed.get("map").unwrap_or(&seed.wrapping_add(2));
        cfg.eval.seed = *stage_seed.get("eval").unwrap_or(&seed.wrapping_add(3));
        synth.seed = synth_seed.unwrap_or(seed);

        cfg.data = match (source, target, scenario) {
            (None, None, Some(dir)) => DataSource::Scenario(dir),
            (Some(source), Some(target), None) => DataSource::Files { source, target },
            (None, None, None) => DataSource::Synthetic(synth),
            _ => {
                return Err(Error::Config(
                    "give either data.source and data.target, or data.scenario, or neither for synthetic data"
                        .into(),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.embed.validate()?;
        self.map.validate()?;
        self.eval.validate()?;
        if self.method == Method::Sscdr && self.hops == 0 {
            return Err(Error::Config(
                "SSCDR needs hops >= 1; hops = 0 is SSCDR-naive".into(),
            ));
        }
        Ok(())
    }

    /// Flat `key=value` echo of every setting, parseable by
    /// [`ExperimentConfig::from_pairs`].
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("method", self.method.name().into());
        put("seed", self.seed.to_string());
        put("phi", self.split.phi.to_string());
        put("test_fraction", self.split.test_fraction.to_string());
        put("hops", self.hops.to_string());
        put("early_stop", self.early_stop.to_string());
        put("split.seed", self.split.seed.to_string());
        put("embed.seed", self.embed.seed.to_string());
        put("map.seed", self.map.seed.to_string());
        put("eval.seed", self.eval.seed.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        match &self.data {
            DataSource::Files { source, target } => {
                put("data.source", source.display().to_string());
                put("data.target", target.display().to_string());
            }
            DataSource::Scenario(dir) => put("data.scenario", dir.display().to_string()),
            DataSource::Synthetic(s) => {
                put("synth.users", s.n_users.to_string());
                put("synth.source_items", s.n_source_items.to_string());
                put("synth.target_items", s.n_target_items.to_string());
                put("synth.k_true", s.k_true.to_string());
                put("synth.overlap", s.overlap_fraction.to_string());
                put("synth.density", s.density.to_string());
                put("synth.seed", s.seed.to_string());
            }
        }
        put("filter.min_overlap", self.thresholds.min_overlap_interactions.to_string());
        put("filter.min_other", self.thresholds.min_other_interactions.to_string());
        let e = &self.embed;
        put("embed.dim", e.dim.to_string());
        put("embed.margin", e.margin.to_string());
        put("embed.lr", e.lr.to_string());
        put("embed.reg", e.reg.to_string());
        put("embed.epochs", e.epochs.to_string());
        put("embed.batch_size", e.batch_size.to_string());
        put("embed.patience", e.patience.to_string());
        put("embed.eval_every", e.eval_every.to_string());
        let p = &self.map;
        put("map.lambda", p.lambda.to_string());
        put("map.margin", p.margin.to_string());
        put("map.lr", p.lr.to_string());
        put("map.epochs", p.epochs.to_string());
        put("map.batch_size", p.batch_size.to_string());
        put("map.patience", p.patience.to_string());
        put("map.eval_every", p.eval_every.to_string());
        let cutoffs: Vec<String> = self.eval.cutoffs.iter().map(|n| n.to_string()).collect();
        put("eval.cutoffs", cutoffs.join(","));
        put("eval.repeats", self.eval.repeats.to_string());
        put("eval.negatives", self.eval.negatives.to_string());
        put("eval.apply_cutoff", self.eval.apply_cutoff.to_string());
        m
    }

    /// Input files whose content determines the run, keyed by config key.
    fn input_files(&self) -> Vec<(String, PathBuf)> {
        match &self.data {
            DataSource::Files { source, target } => vec![
                ("data.source".into(), source.clone()),
                ("data.target".into(), target.clone()),
            ],
            DataSource::Scenario(dir) => SCENARIO_FILES
                .iter()
                .map(|f| (format!("data.scenario/{f}"), dir.join(f)))
                .collect(),
            DataSource::Synthetic(_) => Vec::new(),
        }
    }
}

const SCENARIO_FILES: [&str; 7] = [
    "source.tsv",
    "target_train.tsv",
    "overlap.txt",
    "train_overlap.txt",
    "test.tsv",
    "withheld.tsv",
    "meta",
];

/// Parses a flat config file: `key=value` lines, `#` comments.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    crate::data::parse_meta(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// SHA-256 over a git-style blob header (`blob <len>\0`) and the content.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

/// Loads or generates the scenario named by the config.
pub fn prepare_scenario(cfg: &ExperimentConfig) -> Result<CrossDomainScenario> {
    let build = |s: &InteractionSet, t: &InteractionSet| build_scenario(s, t, cfg.thresholds, &cfg.split);
    match &cfg.data {
        DataSource::Scenario(dir) => CrossDomainScenario::load(dir),
        DataSource::Files { source, target } => {
            build(&load_interactions(source)?, &load_interactions(target)?)
        }
        DataSource::Synthetic(p) => {
            let (s, t) = generate_synthetic(p)?;
            build(&s, &t)
        }
    }
}

/// Ranks by training popularity in the target domain.
pub struct PopularityScorer {
    counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn new(target: &InteractionSet) -> Self {
        PopularityScorer {
            counts: (0..target.n_items()).map(|i| target.users_of(i).len() as f64).collect(),
        }
    }
}

impl Scorer for PopularityScorer {
    fn higher_is_better(&self) -> bool {
        true
    }

    fn score(&self, _user: &str, candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(candidates.iter().map(|&c| self.counts[c]).collect())
    }
}

/// Scores target items for users that have a query vector in the space.
///
/// `item_offset` maps target item `j` to row `item_offset + j` of the space.
pub struct VectorScorer<'a> {
    space: &'a EmbeddingSpace,
    queries: HashMap<String, Vec<f64>>,
    item_offset: usize,
}

impl<'a> VectorScorer<'a> {
    pub fn new(space: &'a EmbeddingSpace, queries: HashMap<String, Vec<f64>>, item_offset: usize) -> Self {
        VectorScorer {
            space,
            queries,
            item_offset,
        }
    }
}

impl Scorer for VectorScorer<'_> {
    fn higher_is_better(&self) -> bool {
        self.space.kind.higher_is_better()
    }

    fn score(&self, user: &str, candidates: &[usize]) -> Result<Vec<f64>> {
        let q = self
            .queries
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        Ok(candidates
            .iter()
            .map(|&c| self.space.kind.score(q, self.space.item(self.item_offset + c)))
            .collect())
    }
}

/// Target-space vectors of every test user: aggregate `hops` rounds in the
/// source space, then map.
pub fn infer_test_users(
    net: &MappingNetwork,
    source_space: &EmbeddingSpace,
    scenario: &CrossDomainScenario,
    hops: usize,
) -> Result<HashMap<String, Vec<f64>>> {
    let agg = aggregate(source_space, &scenario.source, hops)?;
    scenario
        .test_cases
        .iter()
        .map(|case| {
            let idx = scenario
                .source
                .user_idx(&case.user)
                .ok_or_else(|| Error::UnknownUser(case.user.clone()))?;
            Ok((case.user.clone(), net.forward(agg.user(idx))?))
        })
        .collect()
}

fn validation_cutoff(cfg: &EvalConfig) -> EvalConfig {
    EvalConfig {
        cutoffs: vec![cfg.cutoffs[0]],
        repeats: 1,
        ..cfg.clone()
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub method: Method,
    pub phi: f64,
    pub report: EvalReport,
    pub scenario: CrossDomainScenario,
    pub source_space: Option<EmbeddingSpace>,
    pub target_space: Option<EmbeddingSpace>,
    pub mapping: Option<MappingNetwork>,
    /// Inferred target-space vectors of the test users (mapping methods).
    pub inferred: Option<HashMap<String, Vec<f64>>>,
}

impl ExperimentOutcome {
    pub fn report_tsv(&self) -> String {
        report_tsv(self.method.name(), self.phi, &self.report)
    }
}

/// Trains per-domain spaces of the given kind.
pub fn train_domain_spaces(
    scenario: &CrossDomainScenario,
    embed: &EmbedTrainConfig,
    kind: SpaceKind,
) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    let source = train_embeddings(&scenario.source, embed, kind, None)?.model;
    let target_cfg = EmbedTrainConfig {
        seed: embed.seed.wrapping_add(1_000_003),
        ..embed.clone()
    };
    let target = train_embeddings(&scenario.target, &target_cfg, kind, None)?.model;
    Ok((source, target))
}

/// Mapping settings implied by a method.
pub fn mapping_config(method: Method, base: &MapTrainConfig) -> MapTrainConfig {
    let mode = match method {
        Method::EmcdrBpr | Method::EmcdrCml => MapMode::SupervisedOnly,
        _ => MapMode::SemiSupervised,
    };
    MapTrainConfig {
        mode,
        ..base.clone()
    }
}

/// Runs one method on an already prepared scenario.
pub fn run_on_scenario(cfg: &ExperimentConfig, scenario: CrossDomainScenario) -> Result<ExperimentOutcome> {
    let mut spaces = HashMap::new();
    run_method(cfg, cfg.method, scenario, &mut spaces)
}

/// Runs several methods on one scenario. Methods that share a space kind
/// reuse the same per-domain embeddings, which are identical to what
/// separate runs would train.
pub fn run_matrix(
    cfg: &ExperimentConfig,
    scenario: &CrossDomainScenario,
    methods: &[Method],
) -> Result<Vec<ExperimentOutcome>> {
    let mut spaces = HashMap::new();
    methods
        .iter()
        .map(|&m| run_method(cfg, m, scenario.clone(), &mut spaces))
        .collect()
}

type DomainSpaces = HashMap<SpaceKind, (EmbeddingSpace, EmbeddingSpace)>;

fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    scenario: CrossDomainScenario,
    spaces: &mut DomainSpaces,
) -> Result<ExperimentOutcome> {
    let val_cfg = validation_cutoff(&cfg.eval);
    let mut outcome = ExperimentOutcome {
        method,
        phi: cfg.split.phi,
        report: EvalReport::default(),
        source_space: None,
        target_space: None,
        mapping: None,
        inferred: None,
        scenario,
    };
    let scenario = &outcome.scenario;

    outcome.report = match method {
        Method::ItemPop => evaluate(&PopularityScorer::new(&scenario.target), scenario, &cfg.eval)?,
        Method::Bpr | Method::Cml => {
            let kind = if method == Method::Bpr {
                SpaceKind::InnerProduct
            } else {
                SpaceKind::Metric
            };
            let unified = build_unified(scenario);
            let offset = scenario.source.n_items();
            let queries_of = |space: &EmbeddingSpace| -> HashMap<String, Vec<f64>> {
                scenario
                    .test_cases
                    .iter()
                    .filter_map(|c| unified.user_idx(&c.user).map(|u| (c.user.clone(), space.user(u).to_vec())))
                    .collect()
            };
            let mut hook = |space: &EmbeddingSpace| -> Result<f64> {
                let scorer = VectorScorer::new(space, queries_of(space), offset);
                Ok(evaluate_held_out(&scorer, scenario, &val_cfg, HeldOut::Validation)?.mean.hit[0])
            };
            let hook_ref: Option<crate::embed::ValidationHook<'_>> =
                if cfg.early_stop { Some(&mut hook) } else { None };
            let space = train_embeddings(&unified, &cfg.embed, kind, hook_ref)?.model;
            let report = evaluate(&VectorScorer::new(&space, queries_of(&space), offset), scenario, &cfg.eval)?;
            outcome.target_space = Some(space);
            report
        }
        Method::EmcdrBpr | Method::EmcdrCml | Method::SscdrNaive | Method::Sscdr => {
            let kind = if method == Method::EmcdrBpr {
                SpaceKind::InnerProduct
            } else {
                SpaceKind::Metric
            };
            let hops = if method == Method::Sscdr { cfg.hops } else { 0 };
            let (source_space, target_space) = match spaces.entry(kind) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(train_domain_spaces(scenario, &cfg.embed, kind)?)
                }
            };
            let (source_space, target_space) = (&*source_space, &*target_space);
            let map_cfg = mapping_config(method, &cfg.map);
            let mut hook = |net: &MappingNetwork| -> Result<f64> {
                let queries = infer_test_users(net, source_space, scenario, hops)?;
                let scorer = VectorScorer::new(target_space, queries, 0);
                Ok(evaluate_held_out(&scorer, scenario, &val_cfg, HeldOut::Validation)?.mean.hit[0])
            };
            let hook_ref: Option<crate::mapper::MapValidationHook<'_>> =
                if cfg.early_stop { Some(&mut hook) } else { None };
            let net = train_mapping(source_space, target_space, scenario, &map_cfg, hook_ref)?.model;
            let queries = infer_test_users(&net, source_space, scenario, hops)?;
            let report = evaluate(&VectorScorer::new(target_space, queries.clone(), 0), scenario, &cfg.eval)?;
            outcome.inferred = Some(queries);
            outcome.mapping = Some(net);
            outcome.source_space = Some(source_space.clone());
            outcome.target_space = Some(target_space.clone());
            report
        }
    };
    Ok(outcome)
}

/// Verifies expected input hashes, prepares the scenario, runs the method
/// and, when an output directory is configured, persists every artifact.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut hashes = BTreeMap::new();
    for (key, path) in cfg.input_files() {
        let h = hash_file(&path)?;
        if let Some(expected) = cfg.expected_hashes.get(&key) {
            if *expected != h {
                return Err(Error::Config(format!(
                    "content hash of {} does not match the manifest",
                    path.display()
                )));
            }
        }
        hashes.insert(key, h);
    }

    let marker = cfg.out.as_ref().map(|d| d.join("INCOMPLETE"));
    if let (Some(dir), Some(marker)) = (&cfg.out, &marker) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(marker, "run did not finish\n").map_err(|e| Error::io(marker, e))?;
    }

    let scenario = prepare_scenario(cfg)?;
    let outcome = run_on_scenario(cfg, scenario)?;

    if let (Some(dir), Some(marker)) = (&cfg.out, &marker) {
        persist(dir, cfg, &outcome, &hashes)?;
        fs::remove_file(marker).map_err(|e| Error::io(marker, e))?;
    }
    Ok(outcome)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.txt`: the full config echo plus `hash.*` lines for inputs.
pub fn manifest_text(cfg: &ExperimentConfig, hashes: &BTreeMap<String, String>) -> String {
    let mut out = String::from("# cdrec run manifest; usable as --config to reproduce this run\n");
    for (k, v) in cfg.to_pairs() {
        out.push_str(&format!("{k}={v}\n"));
    }
    for (k, v) in hashes {
        out.push_str(&format!("hash.{k}={v}\n"));
    }
    out
}

fn persist(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    input_hashes: &BTreeMap<String, String>,
) -> Result<()> {
    outcome.scenario.save(&dir.join("scenario"))?;
    match outcome.method {
        Method::Bpr | Method::Cml => {
            if let Some(space) = &outcome.target_space {
                space.save(&dir.join("unified.emb"))?;
            }
        }
        _ => {
            if let Some(space) = &outcome.source_space {
                space.save(&dir.join("source.emb"))?;
            }
            if let Some(space) = &outcome.target_space {
                space.save(&dir.join("target.emb"))?;
            }
        }
    }
    if let Some(net) = &outcome.mapping {
        net.save(&dir.join("mapping.txt"))?;
    }
    if let (Some(inferred), Some(target)) = (&outcome.inferred, &outcome.target_space) {
        export_inferred(&dir.join("inferred.emb"), inferred, target)?;
    }
    write_file(&dir.join("report.tsv"), &outcome.report_tsv())?;
    write_file(&dir.join("manifest.txt"), &manifest_text(cfg, input_hashes))
}

/// Writes inferred cold-start vectors with the target items, kind `inferred`.
pub fn export_inferred(
    path: &Path,
    inferred: &HashMap<String, Vec<f64>>,
    target: &EmbeddingSpace,
) -> Result<()> {
    let mut users: Vec<&String> = inferred.keys().collect();
    users.sort();
    let dim = target.dim();
    let mut flat = Vec::with_capacity(users.len() * dim);
    for u in &users {
        flat.extend_from_slice(&inferred[*u]);
    }
    let users_m = ndarray::Array2::from_shape_vec((users.len(), dim), flat)
        .map_err(|_| Error::DimensionMismatch {
            expected: dim,
            actual: 0,
        })?;
    write_vectors(
        path,
        &VectorFile {
            kind: "inferred".into(),
            user_ids: users.into_iter().cloned().collect(),
            users: users_m,
            item_ids: target.item_ids.clone(),
            items: target.items.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("WARP".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn pairs_round_trip() {
        let mut pairs = BTreeMap::new();
        pairs.insert("method".to_string(), "EMCDR-CML".to_string());
        pairs.insert("seed".to_string(), "17".to_string());
        pairs.insert("eval.cutoffs".to_string(), "5,10".to_string());
        pairs.insert("synth.users".to_string(), "300".to_string());
        let cfg = ExperimentConfig::from_pairs(&pairs).unwrap();
        assert_eq!(cfg.embed.seed, 18);
        assert_eq!(cfg.eval.cutoffs, vec![5, 10]);
        let again = ExperimentConfig::from_pairs(&cfg.to_pairs()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_fail_fast() {
        let mut pairs = BTreeMap::new();
        pairs.insert("embed.dimension".to_string(), "4".to_string());
        assert!(matches!(ExperimentConfig::from_pairs(&pairs), Err(Error::Config(_))));
    }

    #[test]
    fn sscdr_needs_hops() {
        let mut pairs = BTreeMap::new();
        pairs.insert("hops".to_string(), "0".to_string());
        assert!(matches!(ExperimentConfig::from_pairs(&pairs), Err(Error::Config(_))));
    }

    #[test]
    fn git_style_hash() {
        // `git hash-object` uses SHA-1; the same blob framing is kept with SHA-256.
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
