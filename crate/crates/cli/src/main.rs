//! `cdrec`: cross-domain cold-start recommendation experiments.
//!
//! Every subcommand reads the same flat `key=value` config; the named flags
//! and `--set key=value` override it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdrec_core::data::build_unified;
use cdrec_core::embed::{train_embeddings, EmbeddingSpace, SpaceKind};
use cdrec_core::eval::{evaluate, report_table};
use cdrec_core::experiment::{
    export_inferred, infer_test_users, mapping_config, prepare_scenario, read_config_file,
    run_experiment, train_domain_spaces, DataSource, ExperimentConfig, Method, PopularityScorer,
    VectorScorer,
};
use cdrec_core::mapper::{train_mapping, MappingNetwork};
use cdrec_core::synth::generate_synthetic;
use cdrec_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "cdrec", version, about = "Cross-domain cold-start recommendation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Flat key=value config file (a run manifest works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    phi: Option<f64>,
    #[arg(long, global = true)]
    hops: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Global seed. Replaces any per-stage seeds from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. `--set embed.dim=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic source.tsv and target.tsv.
    GenSynth,
    /// Filter, split and save a scenario directory.
    BuildScenario,
    /// Train the embedding spaces the method needs.
    TrainEmbed,
    /// Train the mapping network on saved embeddings.
    TrainMap,
    /// Evaluate saved artifacts.
    Eval,
    /// End-to-end run with artifacts, report and manifest.
    Run,
    /// Write inferred target-space vectors of the test users.
    ExportVectors,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut pairs = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let mut put = |k: &str, v: String| {
            pairs.insert(k.to_string(), v);
        };
        if let Some(m) = &self.method {
            put("method", m.clone());
        }
        if let Some(v) = self.phi {
            put("phi", v.to_string());
        }
        if let Some(v) = self.hops {
            put("hops", v.to_string());
        }
        if let Some(v) = self.lambda {
            put("map.lambda", v.to_string());
        }
        if let Some(v) = &self.out {
            put("out", v.display().to_string());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            put(k.trim(), v.trim().to_string());
        }
        if let Some(v) = self.seed {
            for k in ["split.seed", "embed.seed", "map.seed", "eval.seed", "synth.seed"] {
                pairs.remove(k);
            }
            pairs.insert("seed".into(), v.to_string());
        }
        ExperimentConfig::from_pairs(&pairs)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("this subcommand needs --out".into()))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn space_kind(method: Method) -> SpaceKind {
    match method {
        Method::Bpr | Method::EmcdrBpr => SpaceKind::InnerProduct,
        _ => SpaceKind::Metric,
    }
}

fn require_mapping(method: Method) -> Result<()> {
    if method.uses_mapping() {
        Ok(())
    } else {
        Err(Error::Config(format!("{method} has no mapping network")))
    }
}

fn hops_for(cfg: &ExperimentConfig) -> usize {
    if cfg.method == Method::Sscdr {
        cfg.hops
    } else {
        0
    }
}

fn gen_synth(cfg: &ExperimentConfig) -> Result<()> {
    let DataSource::Synthetic(params) = &cfg.data else {
        return Err(Error::Config("gen-synth takes synth.* keys, not data files".into()));
    };
    let dir = out_dir(cfg)?;
    let (source, target) = generate_synthetic(params)?;
    source.write_tsv(&dir.join("source.tsv"))?;
    target.write_tsv(&dir.join("target.tsv"))?;
    println!(
        "source: {} users, {} items, {} interactions",
        source.n_users(),
        source.n_items(),
        source.n_interactions()
    );
    println!(
        "target: {} users, {} items, {} interactions",
        target.n_users(),
        target.n_items(),
        target.n_interactions()
    );
    Ok(())
}

fn build_scenario(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let scenario = prepare_scenario(cfg)?;
    scenario.save(dir)?;
    println!(
        "{} overlap users, {} test users, {} mapping users; source {}x{}, target {}x{}",
        scenario.overlap_users.len(),
        scenario.test_cases.len(),
        scenario.train_overlap_users.len(),
        scenario.source.n_users(),
        scenario.source.n_items(),
        scenario.target.n_users(),
        scenario.target.n_items()
    );
    Ok(())
}

fn train_embed(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let scenario = prepare_scenario(cfg)?;
    let kind = space_kind(cfg.method);
    match cfg.method {
        Method::ItemPop => return Err(Error::Config("ITEMPOP has nothing to train".into())),
        Method::Bpr | Method::Cml => {
            let space = train_embeddings(&build_unified(&scenario), &cfg.embed, kind, None)?.model;
            space.save(&dir.join("unified.emb"))?;
        }
        _ => {
            let (source, target) = train_domain_spaces(&scenario, &cfg.embed, kind)?;
            source.save(&dir.join("source.emb"))?;
            target.save(&dir.join("target.emb"))?;
        }
    }
    println!("{} embeddings written to {}", kind.label(), dir.display());
    Ok(())
}

fn load_domain_spaces(dir: &Path) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    Ok((
        EmbeddingSpace::load(&dir.join("source.emb"))?,
        EmbeddingSpace::load(&dir.join("target.emb"))?,
    ))
}

fn train_map(cfg: &ExperimentConfig) -> Result<()> {
    require_mapping(cfg.method)?;
    let dir = out_dir(cfg)?;
    let scenario = prepare_scenario(cfg)?;
    let (source, target) = load_domain_spaces(dir)?;
    let trained = train_mapping(&source, &target, &scenario, &mapping_config(cfg.method, &cfg.map), None)?;
    trained.model.save(&dir.join("mapping.txt"))?;
    println!(
        "mapping trained on {} users, final loss {:.5}",
        scenario.train_overlap_users.len(),
        trained.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let scenario = prepare_scenario(cfg)?;
    let report = match cfg.method {
        Method::ItemPop => evaluate(&PopularityScorer::new(&scenario.target), &scenario, &cfg.eval)?,
        Method::Bpr | Method::Cml => {
            let space = EmbeddingSpace::load(&dir.join("unified.emb"))?;
            let queries = scenario
                .test_cases
                .iter()
                .filter_map(|c| {
                    let idx = space.user_ids.binary_search(&c.user).ok()?;
                    Some((c.user.clone(), space.user(idx).to_vec()))
                })
                .collect();
            evaluate(&VectorScorer::new(&space, queries, scenario.source.n_items()), &scenario, &cfg.eval)?
        }
        _ => {
            let (source, target) = load_domain_spaces(dir)?;
            let net = MappingNetwork::load(&dir.join("mapping.txt"))?;
            let queries = infer_test_users(&net, &source, &scenario, hops_for(cfg))?;
            evaluate(&VectorScorer::new(&target, queries, 0), &scenario, &cfg.eval)?
        }
    };
    let tsv = cdrec_core::eval::report_tsv(cfg.method.name(), cfg.split.phi, &report);
    let path = dir.join("report.tsv");
    fs::write(&path, tsv).map_err(|e| Error::io(&path, e))?;
    print!("{}", report_table(&[(cfg.method.name().to_string(), cfg.split.phi, &report)]));
    Ok(())
}

fn run(cfg: &ExperimentConfig) -> Result<()> {
    let outcome = run_experiment(cfg)?;
    print!(
        "{}",
        report_table(&[(outcome.method.name().to_string(), outcome.phi, &outcome.report)])
    );
    if let Some(dir) = &cfg.out {
        eprintln!("artifacts written to {}", dir.display());
    }
    Ok(())
}

fn export_vectors(cfg: &ExperimentConfig) -> Result<()> {
    require_mapping(cfg.method)?;
    let dir = out_dir(cfg)?;
    let scenario = prepare_scenario(cfg)?;
    let (source, target) = load_domain_spaces(dir)?;
    let net = MappingNetwork::load(&dir.join("mapping.txt"))?;
    let inferred = infer_test_users(&net, &source, &scenario, hops_for(cfg))?;
    let path = dir.join("inferred.emb");
    export_inferred(&path, &inferred, &target)?;
    println!("{} inferred users written to {}", inferred.len(), path.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = cli.overrides.resolve().and_then(|cfg| match cli.command {
        Command::GenSynth => gen_synth(&cfg),
        Command::BuildScenario => build_scenario(&cfg),
        Command::TrainEmbed => train_embed(&cfg),
        Command::TrainMap => train_map(&cfg),
        Command::Eval => eval(&cfg),
        Command::Run => run(&cfg),
        Command::ExportVectors => export_vectors(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
