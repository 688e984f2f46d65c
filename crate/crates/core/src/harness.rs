//! Configuration, data files, Monte Carlo evaluation and experiment reports.
//!
//! JSON files name bidders from 1; sample CSV headers use `bidder_0`,
//! `bidder_1`, ... so that column `k` holds bidder `k + 1`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::{DistributionKind, ProductPrior, ValuationDistribution, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::feasibility::{EnvSpec, Environment};
use crate::learner::{self, CandidatePolicy, LearnerConfig, SampleSet, SampleSource, SearchStrategy};
use crate::levels::{self, LevelConstructionParams, MhrAnchor};
use crate::mechanisms::{AuctionSpec, MyersonAuction, TLevelAuction};
use crate::montecarlo::{self, McEstimate};

/// Parses JSON, reporting failures with the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read file: {e}")))?;
    parse_json(&text).map_err(|e| match e {
        Error::Config { path: field, message } => Error::config(format!("{}: {field}", path.display()), message),
        other => other,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn data_err(file: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Data { file: file.to_path_buf(), row, message: message.into() }
}

fn parse_value(file: &Path, row: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| data_err(file, row, format!("`{field}` is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(data_err(file, row, format!("value {v} must be finite and nonnegative")));
    }
    Ok(v)
}

/// Reads a sample CSV with header `bidder_0,...,bidder_{n-1}`. Errors name
/// the file line (the header is line 1).
pub fn ingest_samples(path: &Path, expected_n: Option<usize>) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::NoSamples);
    }
    let n = header.len();
    for (k, name) in header.iter().enumerate() {
        if name != format!("bidder_{k}") {
            return Err(data_err(path, 1, format!("header column {k} is `{name}`, expected `bidder_{k}`")));
        }
    }
    if let Some(e) = expected_n {
        if e != n {
            return Err(data_err(path, 1, format!("file has {n} bidder columns, expected {e}")));
        }
    }
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != n {
            return Err(data_err(path, line, format!("row has {} fields, expected {n}", record.len())));
        }
        for field in record.iter() {
            values.push(parse_value(path, line, field)?);
        }
    }
    if values.is_empty() {
        return Err(Error::NoSamples);
    }
    SampleSet::new(n, values, SampleSource::Csv { path: path.to_path_buf() })
}

/// Reads a one-column CSV of values; a non-numeric first line is treated as a header.
pub fn load_value_column(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 1;
        if record.len() != 1 {
            return Err(data_err(path, line, format!("expected one column, found {}", record.len())));
        }
        if k == 0 && record[0].parse::<f64>().is_err() {
            continue;
        }
        out.push(parse_value(path, line, &record[0])?);
    }
    if out.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(out)
}

pub fn write_samples_csv(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..samples.n()).map(|k| format!("bidder_{k}")))?;
    for row in samples.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One CSV row per profile: values, winner bitmask (bit `k` for column
/// `bidder_k`), payments and revenue.
pub fn write_outcome_batch<W: Write>(out: W, auction: &TLevelAuction, samples: &SampleSet) -> Result<()> {
    let n = samples.n();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..n).map(|k| format!("bidder_{k}")).collect();
    header.push("winners".into());
    header.extend((0..n).map(|k| format!("payment_{k}")));
    header.push("revenue".into());
    w.write_record(&header)?;
    for row in samples.rows() {
        let o = auction.run(row);
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(o.winners.bits().to_string());
        rec.extend(o.payments.iter().map(|p| p.to_string()));
        rec.push(o.revenue.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One bidder's distribution in a prior file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BidderSpec {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    TruncatedExponential { rate: f64, hi: f64 },
    PiecewiseLinearCdf { breakpoints: Vec<[f64; 2]> },
    Empirical { values: Vec<f64> },
    /// Empirical distribution read from a one-column CSV.
    EmpiricalCsv { path: PathBuf },
}

impl BidderSpec {
    fn build(&self, base: &Path) -> Result<ValuationDistribution> {
        let kind = match self.clone() {
            BidderSpec::Uniform { lo, hi } => DistributionKind::Uniform { lo, hi },
            BidderSpec::Exponential { rate } => DistributionKind::TruncatedExponential { rate, hi: None },
            BidderSpec::TruncatedExponential { rate, hi } => DistributionKind::TruncatedExponential { rate, hi: Some(hi) },
            BidderSpec::PiecewiseLinearCdf { breakpoints } => DistributionKind::PiecewiseLinearCdf { breakpoints },
            BidderSpec::Empirical { values } => DistributionKind::Empirical { values },
            BidderSpec::EmpiricalCsv { path } => DistributionKind::Empirical { values: load_value_column(&resolve(base, &path))? },
        };
        ValuationDistribution::new(kind)
    }
}

/// Prior file: one entry per bidder, or a single entry repeated `n` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub bidders: Vec<BidderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Support bound; defaults to the largest support top when all are bounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bound: Option<f64>,
}

impl PriorSpec {
    pub fn build(&self, base: &Path) -> Result<ProductPrior> {
        let specs: Vec<&BidderSpec> = match self.n {
            Some(n) if self.bidders.len() == 1 => vec![&self.bidders[0]; n],
            Some(n) if self.bidders.len() != n => {
                return Err(Error::config("prior.n", format!("n = {n} but {} bidders are listed", self.bidders.len())))
            }
            _ => self.bidders.iter().collect(),
        };
        let mut dists = Vec::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            let k = if self.bidders.len() == 1 { 0 } else { i };
            dists.push(s.build(base).map_err(|e| match e {
                Error::InvalidDistribution(m) => Error::config(format!("prior.bidders[{k}]"), m),
                other => other,
            })?);
        }
        let prior = match self.h_bound {
            Some(h) => ProductPrior::new(dists, Some(h)),
            None => ProductPrior::with_tight_bound(dists),
        };
        prior.map_err(|e| match e {
            Error::InvalidDistribution(m) => Error::config("prior", m),
            other => other,
        })
    }

    /// Data files the prior reads, resolved against `base`.
    pub fn input_files(&self, base: &Path) -> Vec<PathBuf> {
        self.bidders
            .iter()
            .filter_map(|b| match b {
                BidderSpec::EmpiricalCsv { path } => Some(resolve(base, path)),
                _ => None,
            })
            .collect()
    }
}

fn default_anchor_samples() -> usize {
    100_000
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhrParams {
    pub epsilon: f64,
    #[serde(default = "default_anchor_samples")]
    pub anchor_samples: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiGridParams {
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnParams {
    pub t: usize,
    /// Training sample size.
    pub m: usize,
    #[serde(default = "default_candidates")]
    pub candidates: CandidatePolicy,
    #[serde(default = "default_strategy")]
    pub strategy: SearchStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    /// Training sizes for a learning curve; each uses a prefix of the same draws.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub learning_curve: Vec<usize>,
    /// Train on this CSV instead of drawing from the prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_csv: Option<PathBuf>,
}

fn default_candidates() -> CandidatePolicy {
    CandidatePolicy::SampleValues
}

fn default_strategy() -> SearchStrategy {
    SearchStrategy::Exhaustive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionFile {
    pub path: PathBuf,
    /// Checked as `candidate >= min_ratio * myerson - slack` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
}

/// How the candidate auction of an experiment is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSpec {
    Bounded(LevelConstructionParams),
    Matroid(LevelConstructionParams),
    Mhr(MhrParams),
    PhiGrid(PhiGridParams),
    Learn(LearnParams),
    Auction(AuctionFile),
}

impl CandidateSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CandidateSpec::Bounded(_) => "bounded",
            CandidateSpec::Matroid(_) => "matroid",
            CandidateSpec::Mhr(_) => "mhr",
            CandidateSpec::PhiGrid(_) => "phi_grid",
            CandidateSpec::Learn(_) => "learn",
            CandidateSpec::Auction(_) => "auction",
        }
    }

    fn input_files(&self, base: &Path) -> Vec<PathBuf> {
        match self {
            CandidateSpec::Learn(LearnParams { samples_csv: Some(p), .. }) => vec![resolve(base, p)],
            CandidateSpec::Auction(a) => vec![resolve(base, &a.path)],
            _ => Vec::new(),
        }
    }
}

/// Seed for an independent stream derived from the experiment seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const LEARN_STREAM: u64 = 1;
const ANCHOR_STREAM: u64 = 2;

/// A candidate auction and what was learned while producing it.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub auction: TLevelAuction,
    pub anchor: Option<MhrAnchor>,
    pub training: Option<SampleSet>,
    pub empirical_value: Option<f64>,
}

/// Builds, learns or loads the candidate auction described by `spec`.
pub fn build_candidate(
    spec: &CandidateSpec,
    prior: &ProductPrior,
    env: &Environment,
    grid_size: usize,
    seed: u64,
    base: &Path,
) -> Result<Candidate> {
    let plain = |auction| Candidate { auction, anchor: None, training: None, empirical_value: None };
    let need_single = |what: &str| -> Result<()> {
        if matches!(env, Environment::SingleItem { .. }) {
            Ok(())
        } else {
            Err(Error::config("env", format!("{what} construction needs a single_item environment")))
        }
    };
    match spec {
        CandidateSpec::Bounded(p) => {
            need_single("bounded")?;
            let p = LevelConstructionParams { grid_size, ..p.clone() };
            Ok(plain(levels::build_bounded(prior, &p)?))
        }
        CandidateSpec::Matroid(p) => {
            let p = LevelConstructionParams { grid_size, ..p.clone() };
            Ok(plain(levels::build_matroid_levels(prior, env, &p)?))
        }
        CandidateSpec::Mhr(p) => {
            need_single("mhr")?;
            let ep = levels::solve_epsilon_prime(p.epsilon)?;
            let draws = montecarlo::draw_profiles(prior, p.anchor_samples, sub_seed(seed, ANCHOR_STREAM));
            let max_bids: Vec<f64> = draws.chunks(prior.n()).map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
            let anchor = levels::estimate_anchor(&max_bids, ep, p.delta)?;
            let auction = levels::build_mhr(prior, &anchor, p.epsilon, grid_size)?;
            Ok(Candidate { auction, anchor: Some(anchor), training: None, empirical_value: None })
        }
        CandidateSpec::PhiGrid(p) => Ok(plain(levels::build_phi_grid(prior, env, p.epsilon, grid_size)?)),
        CandidateSpec::Learn(p) => {
            let training = match &p.samples_csv {
                Some(path) => ingest_samples(&resolve(base, path), Some(prior.n()))?.prefix(p.m)?,
                None => {
                    let m = p.learning_curve.iter().copied().fold(p.m, usize::max);
                    SampleSet::from_prior(prior, m, sub_seed(seed, LEARN_STREAM))?
                }
            };
            let config = LearnerConfig {
                t: p.t,
                candidates: p.candidates.clone(),
                strategy: p.strategy.clone(),
                truncation: p.truncation,
                seed,
            };
            let learned = learner::erm(&training.prefix(p.m)?, env, &config)?;
            Ok(Candidate {
                auction: learned.auction,
                anchor: None,
                empirical_value: Some(learned.empirical_value),
                training: Some(training),
            })
        }
        CandidateSpec::Auction(a) => {
            let spec: AuctionSpec = load_json(&resolve(base, &a.path))?;
            let auction = TLevelAuction::try_from(spec)?;
            if auction.env() != env {
                return Err(Error::config("candidate.path", "auction environment differs from the experiment's"));
            }
            Ok(plain(auction))
        }
    }
}

/// Monte Carlo estimate of the auction's (truncated, if configured)
/// revenue under `prior`, with a 99% confidence half-width.
pub fn evaluate(auction: &TLevelAuction, prior: &ProductPrior, mc_samples: usize, seed: u64) -> Result<McEstimate> {
    if auction.n() != prior.n() {
        return Err(Error::InvalidParameter(format!(
            "auction has {} bidders but prior has {}",
            auction.n(),
            prior.n()
        )));
    }
    if mc_samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 Monte Carlo samples, got {mc_samples}")));
    }
    let est = montecarlo::estimate(prior, mc_samples, seed, |v| auction.counted_revenue(v));
    let range = auction.truncation().or_else(|| prior.h_bound().map(|h| h * auction.n() as f64));
    Ok(match range {
        Some(r) => est.with_fallback(r),
        None => est,
    })
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_env() -> EnvSpec {
    EnvSpec::SingleItem
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Summary table; a header is written when the file is new.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Two-column `m revenue` learning-curve data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    #[serde(default = "default_env")]
    pub env: EnvSpec,
    pub candidate: CandidateSpec,
    pub mc_samples: usize,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < 100 {
            return Err(Error::config("mc_samples", format!("must be at least 100, got {}", self.mc_samples)));
        }
        if self.grid_size < 16 {
            return Err(Error::config("grid_size", format!("must be at least 16, got {}", self.grid_size)));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = load_json(path)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub statement: String,
    pub candidate: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub empirical: f64,
    pub estimate: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub construction: String,
    pub n: usize,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub myerson: McEstimate,
    pub candidate: McEstimate,
    /// Candidate over Myerson, reported only when Myerson's lower confidence end is positive.
    pub ratio: Option<f64>,
    pub additive_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guarantee: Option<GuaranteeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<MhrAnchor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub learning_curve: Vec<CurvePoint>,
    pub auction: AuctionSpec,
    pub config: ExperimentConfig,
    pub input_hash: String,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    /// True unless a guarantee was checked and failed.
    pub fn passed(&self) -> bool {
        self.guarantee.as_ref().is_none_or(|g| g.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub const CSV_HEADER: &'static str =
        "construction,n,t,m,myerson,myerson_half_width,candidate,candidate_half_width,ratio,additive_gap,guarantee_passed,input_hash";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.construction,
            self.n,
            self.t,
            self.m.map_or(String::new(), |m| m.to_string()),
            self.myerson.mean,
            self.myerson.half_width,
            self.candidate.mean,
            self.candidate.half_width,
            opt(self.ratio),
            self.additive_gap,
            self.guarantee.as_ref().map_or(String::new(), |g| g.passed.to_string()),
            self.input_hash
        )
    }
}

fn blob_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Hash over the primary input and every referenced data file, each
/// digested as a git-style blob.
pub fn input_hash(primary: &[u8], files: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(blob_digest(primary).as_bytes());
    for f in files {
        let bytes = fs::read(f).map_err(|e| Error::config(f.display().to_string(), format!("cannot read file: {e}")))?;
        h.update(b"\n");
        h.update(blob_digest(&bytes).as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn guarantee_for(spec: &CandidateSpec, myerson: &McEstimate, candidate: &McEstimate) -> Option<GuaranteeCheck> {
    let slack = myerson.half_width + candidate.half_width;
    let (statement, bound) = match spec {
        CandidateSpec::Bounded(p) | CandidateSpec::Matroid(p) => {
            (format!("candidate >= (1 - {}) * myerson - slack", p.epsilon), (1.0 - p.epsilon) * myerson.mean - slack)
        }
        CandidateSpec::Mhr(p) => {
            (format!("candidate >= (1 - {}) * myerson - slack", p.epsilon), (1.0 - p.epsilon) * myerson.mean - slack)
        }
        CandidateSpec::PhiGrid(p) => {
            (format!("candidate >= myerson - {} - slack", p.epsilon), myerson.mean - p.epsilon - slack)
        }
        CandidateSpec::Auction(AuctionFile { min_ratio: Some(r), .. }) => {
            (format!("candidate >= {r} * myerson - slack"), r * myerson.mean - slack)
        }
        CandidateSpec::Learn(_) | CandidateSpec::Auction(_) => return None,
    };
    Some(GuaranteeCheck { statement, candidate: candidate.mean, bound, passed: candidate.mean >= bound })
}

/// Runs an experiment whose config was read from `config_bytes`; relative
/// paths resolve against `base`.
pub fn run_experiment_with(config: &ExperimentConfig, base: &Path, config_bytes: &[u8]) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let prior = config.prior.build(base)?;
    let env = config.env.build(prior.n()).map_err(|e| Error::config("env", e.to_string()))?;
    let mut files = config.prior.input_files(base);
    files.extend(config.candidate.input_files(base));
    let hash = input_hash(config_bytes, &files)?;

    let cand = build_candidate(&config.candidate, &prior, &env, config.grid_size, config.seed, base)?;
    let myerson = MyersonAuction::new(prior.clone(), env, config.grid_size)?.expected_revenue(config.mc_samples, config.seed)?;
    let candidate = evaluate(&cand.auction, &prior, config.mc_samples, config.seed)?;

    let mut curve = Vec::new();
    let mut m = None;
    if let CandidateSpec::Learn(p) = &config.candidate {
        m = Some(p.m);
        let training = cand.training.as_ref().expect("learned candidates keep their samples");
        for &size in &p.learning_curve {
            let sub = CandidateSpec::Learn(LearnParams { m: size, learning_curve: Vec::new(), ..p.clone() });
            let learned = match &sub {
                CandidateSpec::Learn(q) => learner::erm(
                    &training.prefix(q.m)?,
                    cand.auction.env(),
                    &LearnerConfig {
                        t: q.t,
                        candidates: q.candidates.clone(),
                        strategy: q.strategy.clone(),
                        truncation: q.truncation,
                        seed: config.seed,
                    },
                )?,
                _ => unreachable!(),
            };
            let est = evaluate(&learned.auction, &prior, config.mc_samples, config.seed)?;
            curve.push(CurvePoint {
                m: size.min(training.m()),
                empirical: learned.empirical_value,
                estimate: est.mean,
                half_width: est.half_width,
            });
        }
    }

    let report = ExperimentReport {
        construction: config.candidate.kind_name().to_string(),
        n: prior.n(),
        t: cand.auction.t(),
        m,
        ratio: (myerson.lower() > 0.0).then(|| candidate.mean / myerson.mean),
        additive_gap: myerson.mean - candidate.mean,
        guarantee: guarantee_for(&config.candidate, &myerson, &candidate),
        myerson,
        candidate,
        anchor: cand.anchor,
        learning_curve: curve,
        auction: cand.auction.to_spec(),
        config: config.clone(),
        input_hash: hash,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_outputs(&report, &config.outputs, base)?;
    Ok(report)
}

/// Runs an experiment from an in-memory config; the input hash covers its canonical JSON.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<ExperimentReport> {
    let bytes = serde_json::to_vec(config)?;
    run_experiment_with(config, base, &bytes)
}

/// Loads and runs a config file; relative paths resolve against its directory.
pub fn run_experiment_file(path: &Path) -> Result<ExperimentReport> {
    let bytes = fs::read(path).map_err(|e| Error::config(path.display().to_string(), format!("cannot read file: {e}")))?;
    let config = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_experiment_with(&config, base, &bytes)
}

fn write_outputs(report: &ExperimentReport, outputs: &OutputPaths, base: &Path) -> Result<()> {
    if let Some(p) = &outputs.report {
        fs::write(resolve(base, p), report.to_json()? + "\n")?;
    }
    if let Some(p) = &outputs.csv {
        let p = resolve(base, p);
        let fresh = !p.exists();
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&p)?;
        if fresh {
            writeln!(f, "{}", ExperimentReport::CSV_HEADER)?;
        }
        writeln!(f, "{}", report.csv_row())?;
    }
    if let Some(p) = &outputs.curve {
        let mut text = String::from("# m revenue\n");
        for pt in &report.learning_curve {
            text.push_str(&format!("{} {}\n", pt.m, pt.estimate));
        }
        fs::write(resolve(base, p), text)?;
    }
    Ok(())
}
