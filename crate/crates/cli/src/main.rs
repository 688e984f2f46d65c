use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use tlevel_core::feasibility::EnvSpec;
use tlevel_core::harness::{self, CandidateSpec, PriorSpec};
use tlevel_core::learner::{self, CandidatePolicy, LearnerConfig, SampleSet, SearchStrategy};
use tlevel_core::mechanisms::AuctionSpec;
use tlevel_core::shattering::{self, ShatterSpec};
use tlevel_core::{Error, TLevelAuction};

const WORKERS_VAR: &str = "TLEVEL_WORKERS";

#[derive(Parser)]
#[command(name = "tlevel", version, about = "t-level auction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an auction on sampled or recorded profiles and write one CSV row per outcome.
    Simulate {
        #[arg(long)]
        auction: PathBuf,
        /// Draw profiles from this prior.
        #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
        prior: Option<PathBuf>,
        /// Replay profiles from a sample CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct a t-level auction from a prior.
    BuildLevels {
        #[arg(long)]
        prior: PathBuf,
        /// Construction JSON, e.g. {"kind":"bounded","epsilon":0.2}.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        grid_size: usize,
        /// Seed for the anchor draws of the mhr construction.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a threshold table.
        #[arg(long)]
        report: bool,
    },
    /// Empirical revenue maximization over samples.
    Learn {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long)]
        t: usize,
        #[arg(long, value_enum, default_value_t = Strategy::Exhaustive)]
        strategy: Strategy,
        /// Add grid points with this spacing to the sample-value candidates.
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        truncation: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo revenue of an auction under a prior.
    Eval {
        #[arg(long)]
        auction: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        mc: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Count labelings of a shattering instance, or probe for a pseudo-dimension lower bound.
    Shatter {
        #[arg(long, required_unless_present = "probe")]
        instance: Option<PathBuf>,
        #[arg(long, conflicts_with = "instance")]
        probe: bool,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[arg(long, default_value_t = 4)]
        max_m: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment config and write its report.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Exit with status 4 when the construction's guarantee check fails.
        #[arg(long)]
        assert: bool,
    },
    /// Sample size sufficient for uniform convergence at the given accuracy.
    Plan {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Overrides the nt ln(nt) scale.
        #[arg(long)]
        pseudo_dim: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        constant: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Exhaustive,
    Ascent,
}

#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "guarantee check failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AssertionFailed>().is_some() {
        return 4;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Guard(_)) => 3,
        Some(e) if e.is_config() => 2,
        _ => 1,
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn base_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_auction(path: &Path) -> tlevel_core::Result<TLevelAuction> {
    let spec: AuctionSpec = harness::load_json(path)?;
    TLevelAuction::try_from(spec)
}

fn load_env(path: Option<&Path>, n: usize) -> tlevel_core::Result<tlevel_core::Environment> {
    let spec = match path {
        Some(p) => harness::load_json(p)?,
        None => EnvSpec::SingleItem,
    };
    spec.build(n)
}

fn load_prior(path: &Path) -> tlevel_core::Result<tlevel_core::ProductPrior> {
    let spec: PriorSpec = harness::load_json(path)?;
    spec.build(base_of(path))
}

fn threshold_table(auction: &TLevelAuction) -> String {
    let mut s = format!("{:<8}", "bidder");
    for k in 0..auction.t() {
        s.push_str(&format!("{:>14}", format!("level {k}")));
    }
    s.push('\n');
    for i in 0..auction.n() {
        s.push_str(&format!("{:<8}", i + 1));
        for v in auction.row(i) {
            s.push_str(&format!("{v:>14.6}"));
        }
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { auction, prior, samples, m, seed, out } => {
            let auction = load_auction(&auction)?;
            let set = match (prior, samples) {
                (Some(p), _) => {
                    let seed = seed.ok_or_else(|| Error::config("--seed", "required when sampling from a prior"))?;
                    SampleSet::from_prior(&load_prior(&p)?, m, seed)?
                }
                (None, Some(s)) => harness::ingest_samples(&s, Some(auction.n()))?,
                (None, None) => unreachable!("clap requires one source"),
            };
            if set.n() != auction.n() {
                return Err(Error::config("--prior", format!("{} bidders, auction has {}", set.n(), auction.n())).into());
            }
            let mut buf = Vec::new();
            harness::write_outcome_batch(&mut buf, &auction, &set)?;
            emit(out.as_deref(), std::str::from_utf8(&buf)?)
        }
        Command::BuildLevels { prior, params, env, grid_size, seed, out, report } => {
            let prior = load_prior(&prior)?;
            let spec: CandidateSpec = harness::load_json(&params)?;
            if matches!(spec, CandidateSpec::Learn(_) | CandidateSpec::Auction(_)) {
                return Err(Error::config("kind", "expected bounded, matroid, mhr or phi_grid").into());
            }
            let env = load_env(env.as_deref(), prior.n())?;
            let cand = harness::build_candidate(&spec, &prior, &env, grid_size, seed, base_of(&params))?;
            let json = serde_json::to_string_pretty(&cand.auction.to_spec())? + "\n";
            if report {
                eprint!("{}", threshold_table(&cand.auction));
            }
            emit(out.as_deref(), &json)
        }
        Command::Learn { samples, env, t, strategy, grid_step, truncation, seed, out } => {
            let set = harness::ingest_samples(&samples, None)?;
            let env = load_env(env.as_deref(), set.n())?;
            let config = LearnerConfig {
                t,
                candidates: match grid_step {
                    Some(step) => CandidatePolicy::SampleValuesPlusGrid { step },
                    None => CandidatePolicy::SampleValues,
                },
                strategy: match strategy {
                    Strategy::Exhaustive => SearchStrategy::Exhaustive,
                    Strategy::Ascent => SearchStrategy::ascent(),
                },
                truncation,
                seed,
            };
            let learned = learner::erm(&set, &env, &config)?;
            log::info!("empirical revenue {} over {} candidates", learned.empirical_value, learned.evaluated);
            emit(out.as_deref(), &(serde_json::to_string_pretty(&learned.auction.to_spec())? + "\n"))
        }
        Command::Eval { auction, prior, mc, seed } => {
            let auction = load_auction(&auction)?;
            let est = harness::evaluate(&auction, &load_prior(&prior)?, mc, seed)?;
            emit(None, &(serde_json::to_string_pretty(&est)? + "\n"))
        }
        Command::Shatter { instance, probe, n, t, max_m, trials, seed } => {
            let value = if probe {
                let domain: Vec<f64> = (1..=10).map(f64::from).collect();
                let targets: Vec<f64> = (1..=10).map(|k| k as f64 - 0.5).collect();
                serde_json::to_value(shattering::pseudo_dim_lower_bound(n, t, &domain, max_m, &targets, trials, seed)?)?
            } else {
                let path = instance.expect("clap requires an instance");
                let spec: ShatterSpec = harness::load_json(&path)?;
                let inst = spec.build()?;
                let count = shattering::count_labelings(&inst)?;
                let n = inst.samples()[0].len();
                let witnesses: Vec<_> = count
                    .witnesses
                    .iter()
                    .map(|(label, rows)| {
                        let auction = AuctionSpec {
                            thresholds: rows.clone(),
                            tie_order: (1..=n).collect(),
                            env: spec.env.clone(),
                            phi: None,
                            truncation: None,
                        };
                        json!({ "label": label, "auction": auction })
                    })
                    .collect();
                json!({
                    "m": inst.m(),
                    "count": count.count,
                    "enumerated": count.enumerated,
                    "shatterable": count.count == 1usize << inst.m(),
                    "within_ceiling": shattering::within_ceiling(count.count, n, spec.t, inst.m()),
                    "witnesses": witnesses,
                })
            };
            emit(None, &(serde_json::to_string_pretty(&value)? + "\n"))
        }
        Command::Report { config, assert } => {
            let report = harness::run_experiment_file(&config)?;
            if report.config.outputs.report.is_none() {
                emit(None, &(report.to_json()? + "\n"))?;
            }
            if let Some(g) = &report.guarantee {
                eprintln!("{}: candidate {} vs bound {} -> {}", g.statement, g.candidate, g.bound, if g.passed { "PASS" } else { "FAIL" });
            }
            if assert && !report.passed() {
                let g = report.guarantee.as_ref().expect("failed reports carry a check");
                return Err(AssertionFailed(g.statement.clone()).into());
            }
            Ok(())
        }
        Command::Plan { h, epsilon, delta, n, t, pseudo_dim, constant } => {
            let d = pseudo_dim.unwrap_or_else(|| learner::pseudo_dim_scale(n, t));
            let m = learner::sample_size_bound(h, epsilon, delta, d, constant)?;
            emit(None, &(serde_json::to_string_pretty(&json!({ "pseudo_dim": d, "samples": m }))? + "\n"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(w) = std::env::var(WORKERS_VAR) {
        match w.parse::<usize>() {
            Ok(k) if k > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(k).build_global().ok();
            }
            _ => {
                eprintln!("error: {WORKERS_VAR} must be a positive integer, got `{w}`");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
