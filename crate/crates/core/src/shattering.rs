//! Brute-force labeling enumeration for tiny instances: how many
//! above/below-target patterns t-level auctions realize on a sample.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{EnvSpec, Environment};
use crate::learner::{multiset_count, nondecreasing_tuples, MAX_ENUMERATION};
use crate::mechanisms::TLevelAuction;
use crate::montecarlo::chunk_rng;

/// Largest sample size a labeling bitmask can hold.
pub const MAX_SHATTER_SAMPLES: usize = 22;

pub const DEFAULT_PADDING: f64 = 1.0;

/// Samples, per-sample revenue targets and the candidate thresholds used
/// to enumerate auctions.
#[derive(Debug, Clone, PartialEq)]
pub struct ShatterInstance {
    pub n: usize,
    pub t: usize,
    samples: Vec<Vec<f64>>,
    targets: Vec<f64>,
    env: Environment,
    universe: Vec<Vec<f64>>,
}

impl ShatterInstance {
    pub fn new(samples: Vec<Vec<f64>>, targets: Vec<f64>, t: usize, env: Environment, padding: f64) -> Result<Self> {
        let m = samples.len();
        let n = env.n();
        if m == 0 {
            return Err(Error::NoSamples);
        }
        if m > MAX_SHATTER_SAMPLES {
            return Err(Error::Guard(format!("{m} samples exceed the limit of {MAX_SHATTER_SAMPLES}")));
        }
        if targets.len() != m {
            return Err(Error::InvalidParameter(format!("{} targets for {m} samples", targets.len())));
        }
        if targets.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter("targets must be positive and finite".into()));
        }
        if samples.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("sample values must be finite and nonnegative".into()));
        }
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidParameter(format!("every sample needs {n} values")));
        }
        if !env.is_matroid_like() {
            return Err(Error::InvalidEnvironment("shattering supports single-item and matroid environments".into()));
        }
        if t == 0 {
            return Err(Error::InvalidParameter("t must be at least 1".into()));
        }
        if !(padding > 0.0 && padding.is_finite()) {
            return Err(Error::InvalidParameter(format!("padding must be positive, got {padding}")));
        }
        let universe = build_threshold_universe(&samples, n, padding);
        Ok(ShatterInstance { n, t, samples, targets, env, universe })
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn universe(&self) -> &[Vec<f64>] {
        &self.universe
    }

    /// Replaces the candidate thresholds, e.g. to add redundant points.
    pub fn with_universe(mut self, universe: Vec<Vec<f64>>) -> Result<Self> {
        if universe.len() != self.n || universe.iter().any(|u| u.is_empty()) {
            return Err(Error::InvalidParameter("need a nonempty candidate list per bidder".into()));
        }
        self.universe = universe
            .into_iter()
            .map(|mut u| {
                u.sort_by(f64::total_cmp);
                u.dedup();
                u
            })
            .collect();
        Ok(self)
    }

    /// Number of auctions [`count_labelings`] enumerates.
    pub fn enumeration_size(&self) -> u128 {
        self.universe
            .iter()
            .map(|u| multiset_count(u.len(), self.t))
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    }

    pub fn to_spec(&self, padding: f64) -> ShatterSpec {
        ShatterSpec {
            samples: self.samples.clone(),
            targets: self.targets.clone(),
            t: self.t,
            env: self.env.to_spec(),
            padding,
        }
    }
}

/// Per bidder: the sorted distinct sample values, the midpoints between
/// neighbours, one point `padding` below the minimum (not below 0) and one
/// `padding` above the maximum. A bidder with no samples gets `{padding}`.
pub fn build_threshold_universe(samples: &[Vec<f64>], n: usize, padding: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut vals: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let (Some(&lo), Some(&hi)) = (vals.first(), vals.last()) else {
                return vec![padding];
            };
            let mut u = vec![(lo - padding).max(0.0)];
            for w in vals.windows(2) {
                u.push(w[0]);
                u.push(0.5 * (w[0] + w[1]));
            }
            u.push(hi);
            u.push(hi + padding);
            u.sort_by(f64::total_cmp);
            u.dedup();
            u
        })
        .collect()
}

/// Bit `j` is set iff the auction's revenue on sample `j` reaches target `j`.
pub fn revenue_labeling(auction: &TLevelAuction, inst: &ShatterInstance) -> u32 {
    inst.samples
        .iter()
        .zip(&inst.targets)
        .enumerate()
        .fold(0u32, |bits, (j, (v, &r))| if auction.revenue(v) >= r { bits | (1 << j) } else { bits })
}

/// Distinct labelings with the first auction (in enumeration order) that realizes each.
#[derive(Debug, Clone)]
pub struct LabelingCount {
    pub count: usize,
    pub enumerated: u128,
    pub witnesses: Vec<(u32, Vec<Vec<f64>>)>,
}

impl LabelingCount {
    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.witnesses.iter().map(|w| w.0)
    }
}

/// Natural log of the ceiling `(nm + nt)^(3nt)` on the number of labelings.
pub fn log_labeling_ceiling(n: usize, t: usize, m: usize) -> f64 {
    3.0 * (n * t) as f64 * ((n * m + n * t) as f64).ln()
}

pub fn within_ceiling(count: usize, n: usize, t: usize, m: usize) -> bool {
    (count as f64).ln() <= log_labeling_ceiling(n, t, m) + 1e-12
}

fn check_guard(size: u128) -> Result<()> {
    if size > MAX_ENUMERATION {
        return Err(Error::Guard(format!(
            "instance needs {size} auctions (limit {MAX_ENUMERATION}); use fewer samples, bidders or levels"
        )));
    }
    Ok(())
}

/// Enumerates every t-level auction over the instance's candidate
/// thresholds and collects the distinct labelings.
pub fn count_labelings(inst: &ShatterInstance) -> Result<LabelingCount> {
    let size = inst.enumeration_size();
    check_guard(size)?;
    let t = inst.t;
    let tuples: Vec<Vec<Vec<usize>>> = inst.universe.iter().map(|u| nondecreasing_tuples(u.len(), t)).collect();
    let radix: Vec<u64> = tuples.iter().map(|x| x.len() as u64).collect();
    let decode = |mut k: u64| -> Vec<Vec<f64>> {
        let mut rows = vec![Vec::new(); inst.n];
        for i in (0..inst.n).rev() {
            let tup = &tuples[i][(k % radix[i]) as usize];
            k /= radix[i];
            rows[i] = tup.iter().map(|&c| inst.universe[i][c]).collect();
        }
        rows
    };
    let mut auction = TLevelAuction::new(decode(0), (0..inst.n).collect(), inst.env.clone(), None)?;
    let mut first: HashMap<u32, u64> = HashMap::new();
    for k in 0..size as u64 {
        for (i, row) in decode(k).iter().enumerate() {
            auction.set_row(i, row);
        }
        first.entry(revenue_labeling(&auction, inst)).or_insert(k);
    }
    let mut witnesses: Vec<(u32, Vec<Vec<f64>>)> = first.into_iter().map(|(l, k)| (l, decode(k))).collect();
    witnesses.sort_by_key(|w| w.0);
    Ok(LabelingCount { count: witnesses.len(), enumerated: size, witnesses })
}

/// True iff all `2^m` labelings are realized.
pub fn is_shatterable(inst: &ShatterInstance) -> Result<bool> {
    Ok(count_labelings(inst)?.count == 1usize << inst.m())
}

/// Largest shattered sample size found by [`pseudo_dim_lower_bound`], with the instance that shows it.
#[derive(Debug, Clone, Serialize)]
pub struct PseudoDimReport {
    pub n: usize,
    pub t: usize,
    pub lower_bound: usize,
    pub witness: Option<ShatterSpec>,
    pub instances_checked: usize,
}

/// Searches for shatterable instances of growing size. For each `m` up to
/// `max_m`, tries `trials` random instances (values from `domain`, targets
/// from `target_grid`) plus one instance per target value with all targets
/// equal. Returns the largest `m` that was shattered.
pub fn pseudo_dim_lower_bound(
    n: usize,
    t: usize,
    domain: &[f64],
    max_m: usize,
    target_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PseudoDimReport> {
    if domain.is_empty() || target_grid.is_empty() {
        return Err(Error::InvalidParameter("domain and target grid must be nonempty".into()));
    }
    if max_m > MAX_SHATTER_SAMPLES {
        return Err(Error::Guard(format!("max_m = {max_m} exceeds {MAX_SHATTER_SAMPLES}")));
    }
    let worst = multiset_count(2 * max_m + 1, t).checked_pow(n as u32).unwrap_or(u128::MAX);
    check_guard(worst)?;
    let env = Environment::single_item(n)?;
    let mut report = PseudoDimReport { n, t, lower_bound: 0, witness: None, instances_checked: 0 };
    for m in 1..=max_m {
        let mut rng = chunk_rng(seed, m as u64);
        let mut found = None;
        let mut attempts: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
        for _ in 0..trials {
            let samples: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| *domain.choose(&mut rng).unwrap()).collect()).collect();
            let targets: Vec<f64> = (0..m).map(|_| *target_grid.choose(&mut rng).unwrap()).collect();
            attempts.push((samples, targets));
        }
        for &r in target_grid {
            let samples: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| *domain.choose(&mut rng).unwrap()).collect()).collect();
            attempts.push((samples, vec![r; m]));
        }
        for (samples, targets) in attempts {
            let inst = ShatterInstance::new(samples, targets, t, env.clone(), DEFAULT_PADDING)?;
            report.instances_checked += 1;
            if is_shatterable(&inst)? {
                found = Some(inst);
                break;
            }
        }
        if let Some(inst) = found {
            report.lower_bound = m;
            report.witness = Some(inst.to_spec(DEFAULT_PADDING));
        }
    }
    Ok(report)
}

fn default_padding() -> f64 {
    DEFAULT_PADDING
}

fn default_env() -> EnvSpec {
    EnvSpec::SingleItem
}

/// Instance file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShatterSpec {
    pub samples: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub t: usize,
    #[serde(default = "default_env")]
    pub env: EnvSpec,
    #[serde(default = "default_padding")]
    pub padding: f64,
}

impl ShatterSpec {
    pub fn build(&self) -> Result<ShatterInstance> {
        let n = self.samples.first().map_or(0, Vec::len);
        ShatterInstance::new(self.samples.clone(), self.targets.clone(), self.t, self.env.build(n)?, self.padding)
    }
}
