//! Command-line driver. The `superglobal` binary is a thin wrapper around
//! [`main`].
//!
//! Exit codes: 0 success, 2 I/O failure, 3 invalid input or configuration,
//! 4 internal error.

mod config;
mod features;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, GroundTruth, Interpolation, NamedGroundTruth, Protocol};
use crate::index::{DescriptorIndex, Hit, RankedList};
use crate::pooling;
use crate::rerank;
use crate::tensor::{Descriptor, DescriptorSet, WhiteningParams};
use crate::tensor_file::{self, names_path, TensorFile};
use crate::tune::{self, TuneSpec};

pub use config::{PathConfig, RunConfig};
pub use features::{load_features_dir, parse_scale_file_name};

pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "superglobal", version, about = "Global-feature pooling, retrieval, reranking and evaluation")]
pub struct Cli {
    /// Run configuration JSON (pooling, rerank and default paths).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads. Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory receiving every output of the command.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool per-image scale files `<image>.s<k>.sgt` into `descriptors.sgt`.
    Pool(PoolArgs),
    /// Normalize and validate a descriptor set into `index.sgt`.
    Index(IndexArgs),
    /// Exact top-k search of query descriptors, writes `search.json`.
    Search(SearchArgs),
    /// Rerank search results with refined global descriptors, writes `rerank.json`.
    Rerank(RerankArgs),
    /// mAP of a result file against ground truth, writes `eval.json`.
    Eval(EvalArgs),
    /// Coarse-to-fine search for one pooling parameter, writes `trace.csv` and `best.json`.
    Tune(TuneArgs),
    /// Convert name-based ground truth to index-based `gt.json`.
    ConvertGt(ConvertGtArgs),
}

#[derive(Debug, Args)]
pub struct WhiteningArgs {
    /// Rank-2 `C_g × C_d` whitening matrix; identity when omitted.
    #[arg(long)]
    pub whitening: Option<PathBuf>,
    /// Rank-1 whitening bias.
    #[arg(long)]
    pub whitening_bias: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub whitening: WhiteningArgs,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub descriptors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Query descriptor tensor (names in the sidecar).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Results per query; the whole database when omitted.
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// `search.json` from the search command.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// medium, hard or plain@<k>.
    #[arg(long, default_value = "medium")]
    pub protocol: String,
    /// trapezoid or plain.
    #[arg(long, default_value = "trapezoid")]
    pub interpolation: String,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// TuneSpec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory of cached feature maps covering every database and query image.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub whitening: WhiteningArgs,
}

#[derive(Debug, Args)]
pub struct ConvertGtArgs {
    #[arg(long)]
    pub input: PathBuf,
}

/// One query's results as written by `search` and `rerank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResultFile {
    pub query: String,
    /// First-stage order, present in rerank output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<NamedHit>>,
    pub results: Vec<NamedHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHit {
    pub index: usize,
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub queries: Vec<QueryResultFile>,
}

#[derive(Debug, Serialize)]
struct TuneBest<'a> {
    parameter: String,
    best_value: BestValue,
    best_map: f64,
    protocol: &'a Protocol,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum BestValue {
    Finite(f64),
    Text(&'static str),
}

/// Parses arguments, runs the command, returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_VALIDATION,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => tensor_file::read_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    config.pooling.validate()?;
    config.rerank.validate()?;
    let threads = cli.threads.or(config.threads);
    if threads == Some(0) {
        return Err(Error::InvalidConfig("--threads must be positive".into()));
    }
    let output = cli
        .output
        .clone()
        .or_else(|| config.paths.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker threads: {e}")))?;
    pool.install(|| {
        fs::create_dir_all(&output).map_err(|e| Error::io(&output, e))?;
        let ctx = Context {
            config: &config,
            output: &output,
        };
        match &cli.command {
            Command::Pool(a) => ctx.pool(a),
            Command::Index(a) => ctx.index(a),
            Command::Search(a) => ctx.search(a),
            Command::Rerank(a) => ctx.rerank(a),
            Command::Eval(a) => ctx.eval(a),
            Command::Tune(a) => ctx.tune(a),
            Command::ConvertGt(a) => ctx.convert_gt(a),
        }
    })
}

struct Context<'a> {
    config: &'a RunConfig,
    output: &'a Path,
}

fn require(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::InvalidConfig(format!("missing --{name} (or paths.{name} in config)")))
}

fn must_exist(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

/// Descriptor tensor plus its name sidecar.
pub fn read_named_descriptors(path: &Path) -> Result<(DescriptorSet, Vec<String>)> {
    let set = tensor_file::read_descriptor_set(path)?;
    let names = tensor_file::read_names(names_path(path))?;
    if names.len() != set.len() {
        return Err(Error::DimMismatch(format!(
            "{} has {} rows but its sidecar lists {} names",
            path.display(),
            set.len(),
            names.len()
        )));
    }
    Ok((set, names))
}

pub fn write_named_descriptors(path: &Path, set: &DescriptorSet, names: &[String]) -> Result<()> {
    tensor_file::write_tensor(path, &TensorFile::from(set))?;
    tensor_file::write_names(names_path(path), names)
}

fn load_index(path: &Path) -> Result<DescriptorIndex> {
    let (set, names) = read_named_descriptors(path)?;
    DescriptorIndex::build(&set, names)
}

fn load_whitening(
    args: &WhiteningArgs,
    paths: &PathConfig,
    channels: usize,
) -> Result<WhiteningParams> {
    let matrix = args.whitening.clone().or_else(|| paths.whitening.clone());
    let bias = args
        .whitening_bias
        .clone()
        .or_else(|| paths.whitening_bias.clone());
    match matrix {
        Some(m) => {
            must_exist(&m)?;
            if let Some(b) = &bias {
                must_exist(b)?;
            }
            tensor_file::read_whitening(&m, bias.as_deref())
        }
        None => Ok(WhiteningParams::identity(channels)),
    }
}

fn to_named(hits: &[Hit], index: &DescriptorIndex) -> Vec<NamedHit> {
    hits.iter()
        .map(|h| NamedHit {
            index: h.index,
            name: index.name(h.index).to_string(),
            score: h.score,
        })
        .collect()
}

impl Context<'_> {
    fn out(&self, file: &str) -> PathBuf {
        self.output.join(file)
    }

    fn pool(&self, a: &PoolArgs) -> Result<()> {
        let dir = require(&a.features, &self.config.paths.features, "features")?;
        must_exist(&dir)?;
        let images = load_features_dir(&dir)?;
        let channels = images[0].1.channels();
        let w = load_whitening(&a.whitening, &self.config.paths, channels)?;
        let (names, sets): (Vec<String>, Vec<_>) = images.into_iter().unzip();
        let descs = pooling::extract_batch(&sets, &self.config.pooling, &w)?;
        let set = DescriptorSet::from_descriptors(&descs)?;
        let path = self.out("descriptors.sgt");
        write_named_descriptors(&path, &set, &names)?;
        println!("pooled {} images into {}", names.len(), path.display());
        Ok(())
    }

    fn index(&self, a: &IndexArgs) -> Result<()> {
        let src = require(&a.descriptors, &self.config.paths.descriptors, "descriptors")?;
        let index = load_index(&src)?;
        let path = self.out("index.sgt");
        write_named_descriptors(&path, index.descriptors(), index.names())?;
        println!("indexed {} descriptors of dim {} into {}", index.len(), index.dim(), path.display());
        Ok(())
    }

    fn search(&self, a: &SearchArgs) -> Result<()> {
        let index = load_index(&require(&a.index, &self.config.paths.index, "index")?)?;
        let (queries, names) =
            read_named_descriptors(&require(&a.queries, &self.config.paths.queries, "queries")?)?;
        let k = a.k.unwrap_or(index.len());
        let lists = (0..queries.len())
            .into_par_iter()
            .map(|i| {
                let q = crate::tensor::l2_normalize(&queries.descriptor(i))?;
                let hits = index.knn(&q, k)?;
                Ok(QueryResultFile {
                    query: names[i].clone(),
                    initial: None,
                    results: to_named(&hits, &index),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let path = self.out("search.json");
        tensor_file::write_json(&path, &ResultsFile { queries: lists })?;
        println!("searched {} queries (k = {k}) into {}", names.len(), path.display());
        Ok(())
    }

    fn rerank(&self, a: &RerankArgs) -> Result<()> {
        let index = load_index(&require(&a.index, &self.config.paths.index, "index")?)?;
        let (queries, names) =
            read_named_descriptors(&require(&a.queries, &self.config.paths.queries, "queries")?)?;
        let results: ResultsFile =
            tensor_file::read_json(require(&a.results, &self.config.paths.results, "results")?)?;
        let by_name: HashMap<&str, usize> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let params = self.config.rerank;
        let lists = results
            .queries
            .par_iter()
            .map(|entry| {
                let qi = *by_name.get(entry.query.as_str()).ok_or_else(|| {
                    Error::InvalidConfig(format!("query {:?} not in query descriptors", entry.query))
                })?;
                let g_q = crate::tensor::l2_normalize(&queries.descriptor(qi))?;
                let initial = RankedList {
                    query: entry.query.clone(),
                    hits: entry
                        .results
                        .iter()
                        .map(|h| resolve_hit(h, &index))
                        .collect::<Result<Vec<_>>>()?,
                };
                let reranked = rerank::rerank(&g_q, &initial, &index, &params)?;
                Ok(QueryResultFile {
                    query: entry.query.clone(),
                    initial: Some(entry.results.clone()),
                    results: to_named(&reranked.hits, &index),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let path = self.out("rerank.json");
        tensor_file::write_json(&path, &ResultsFile { queries: lists })?;
        println!(
            "reranked {} queries (M = {}, K = {}, beta = {}) into {}",
            results.queries.len(),
            params.m_top,
            params.k_neighbors,
            params.beta,
            path.display()
        );
        Ok(())
    }

    fn eval(&self, a: &EvalArgs) -> Result<()> {
        let protocol: Protocol = a.protocol.parse()?;
        let mode: Interpolation = serde_json::from_value(serde_json::Value::String(
            a.interpolation.to_ascii_lowercase(),
        ))
        .map_err(|_| {
            Error::InvalidConfig(format!(
                "unknown interpolation {:?}; expected trapezoid or plain",
                a.interpolation
            ))
        })?;
        let gt: GroundTruth =
            tensor_file::read_json(require(&a.gt, &self.config.paths.ground_truth, "gt")?)?;
        gt.validate()?;
        let results: ResultsFile =
            tensor_file::read_json(require(&a.results, &self.config.paths.results, "results")?)?;
        let db: HashMap<&str, usize> = gt
            .database
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let rankings = results
            .queries
            .iter()
            .map(|q| {
                let ranked = q
                    .results
                    .iter()
                    .map(|h| {
                        db.get(h.name.as_str()).copied().ok_or_else(|| {
                            Error::InvalidConfig(format!(
                                "result {:?} for query {:?} is not in the ground-truth database",
                                h.name, q.query
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((q.query.clone(), ranked))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        let report = eval::evaluate(&gt, &rankings, protocol, mode)?;
        print!("{}", report.table());
        tensor_file::write_json(self.out("eval.json"), &report)
    }

    fn tune(&self, a: &TuneArgs) -> Result<()> {
        must_exist(&a.spec)?;
        let spec: TuneSpec = tensor_file::read_json(&a.spec)?;
        spec.validate()?;
        let dir = require(&a.features, &self.config.paths.features, "features")?;
        must_exist(&dir)?;
        let gt: GroundTruth =
            tensor_file::read_json(require(&a.gt, &self.config.paths.ground_truth, "gt")?)?;
        gt.validate()?;

        let cached: HashMap<String, pooling::ScaleSet> = load_features_dir(&dir)?.into_iter().collect();
        let pick = |name: &String| {
            cached.get(name).cloned().ok_or_else(|| {
                Error::InvalidConfig(format!("no feature maps for {name:?} in {}", dir.display()))
            })
        };
        let db_maps = gt.database.iter().map(pick).collect::<Result<Vec<_>>>()?;
        let query_maps = gt
            .queries
            .iter()
            .map(|q| pick(&q.name))
            .collect::<Result<Vec<_>>>()?;
        let w = load_whitening(&a.whitening, &self.config.paths, db_maps[0].channels())?;

        let objective = |value: f64| -> Result<f64> {
            let mut cfg = self.config.pooling;
            spec.parameter.apply(&mut cfg, value);
            retrieval_map(&gt, &db_maps, &query_maps, &cfg, &w, spec.protocol)
        };
        let outcome = tune::tune_parameter(&spec, objective)?;
        tensor_file::write_atomic(self.out("trace.csv"), &outcome.trace_csv()?)?;
        let best = TuneBest {
            parameter: spec.parameter.to_string(),
            best_value: if outcome.best_value.is_infinite() {
                BestValue::Text("inf")
            } else {
                BestValue::Finite(outcome.best_value)
            },
            best_map: outcome.best_map,
            protocol: &spec.protocol,
        };
        tensor_file::write_json(self.out("best.json"), &best)?;
        println!(
            "best {} = {} (mAP {:.2}) after {} evaluations",
            spec.parameter,
            outcome.best_value,
            outcome.best_map * 100.0,
            outcome.trace.len()
        );
        Ok(())
    }

    fn convert_gt(&self, a: &ConvertGtArgs) -> Result<()> {
        let named: NamedGroundTruth = tensor_file::read_json(&a.input)?;
        let gt = GroundTruth::from_named(&named)?;
        let path = self.out("gt.json");
        tensor_file::write_json(&path, &gt)?;
        println!("converted {} queries into {}", gt.queries.len(), path.display());
        Ok(())
    }
}

fn resolve_hit(h: &NamedHit, index: &DescriptorIndex) -> Result<Hit> {
    if h.index < index.len() && index.name(h.index) == h.name {
        return Ok(Hit {
            index: h.index,
            score: h.score,
        });
    }
    let index_pos = index.position(&h.name).ok_or_else(|| {
        Error::InvalidConfig(format!("result {:?} is not in the index", h.name))
    })?;
    Ok(Hit {
        index: index_pos,
        score: h.score,
    })
}

/// Retrieval-only mAP of freshly pooled descriptors: every query ranks the
/// whole database.
pub fn retrieval_map(
    gt: &GroundTruth,
    db_maps: &[pooling::ScaleSet],
    query_maps: &[pooling::ScaleSet],
    cfg: &pooling::PoolingConfig,
    w: &WhiteningParams,
    protocol: Protocol,
) -> Result<f64> {
    let db = pooling::extract_batch(db_maps, cfg, w)?;
    let queries = pooling::extract_batch(query_maps, cfg, w)?;
    let index = DescriptorIndex::build(&DescriptorSet::from_descriptors(&db)?, gt.database.clone())?;
    let rankings = gt
        .queries
        .par_iter()
        .zip(&queries)
        .map(|(q, d): (_, &Descriptor)| {
            let hits = index.knn(d, index.len())?;
            Ok((q.name.clone(), hits.iter().map(|h| h.index).collect()))
        })
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(eval::evaluate(gt, &rankings, protocol, Interpolation::Trapezoid)?.map)
}
