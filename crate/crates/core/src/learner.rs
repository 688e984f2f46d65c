//! Empirical revenue maximization over t-level auctions.

use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ProductPrior;
use crate::error::{Error, Result};
use crate::feasibility::Environment;
use crate::mechanisms::TLevelAuction;
use crate::montecarlo::{self, chunk_rng};

/// Largest number of auctions exhaustive search will enumerate.
pub const MAX_ENUMERATION: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSource {
    Synthetic { seed: u64 },
    Csv { path: PathBuf },
    Inline,
}

/// `m` valuation profiles over `n` bidders, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    profiles: Vec<f64>,
    source: SampleSource,
}

impl SampleSet {
    pub fn new(n: usize, profiles: Vec<f64>, source: SampleSource) -> Result<Self> {
        if n == 0 || !profiles.len().is_multiple_of(n) {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form rows of {n} bidders",
                profiles.len()
            )));
        }
        if profiles.is_empty() {
            return Err(Error::NoSamples);
        }
        if let Some(k) = profiles.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample {} bidder {} has value {}; values must be finite and nonnegative",
                k / n,
                k % n,
                profiles[k]
            )));
        }
        Ok(SampleSet { n, profiles, source })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("ragged sample rows".into()));
        }
        Self::new(n, rows.concat(), SampleSource::Inline)
    }

    /// `m` profiles drawn from `prior`; identical to the draws the Monte
    /// Carlo estimator makes with the same seed.
    pub fn from_prior(prior: &ProductPrior, m: usize, seed: u64) -> Result<Self> {
        Self::new(prior.n(), montecarlo::draw_profiles(prior, m, seed), SampleSource::Synthetic { seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.profiles.len() / self.n
    }

    pub fn source(&self) -> &SampleSource {
        &self.source
    }

    pub fn flat(&self) -> &[f64] {
        &self.profiles
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.profiles[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.profiles.chunks(self.n)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    /// First `m` profiles.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        let m = m.min(self.m());
        Self::new(self.n, self.profiles[..m * self.n].to_vec(), self.source.clone())
    }
}

/// Mean counted revenue of `auction` over the samples.
pub fn empirical_revenue(auction: &TLevelAuction, samples: &SampleSet) -> Result<f64> {
    if auction.n() != samples.n() {
        return Err(Error::InvalidParameter(format!(
            "auction has {} bidders but samples have {}",
            auction.n(),
            samples.n()
        )));
    }
    Ok(montecarlo::mean_over_rows(samples.flat(), samples.n(), |v| auction.counted_revenue(v)).mean)
}

/// `|empirical revenue - Monte Carlo revenue under prior|`.
pub fn generalization_gap(
    auction: &TLevelAuction,
    samples: &SampleSet,
    prior: &ProductPrior,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    let empirical = empirical_revenue(auction, samples)?;
    let truth = montecarlo::estimate(prior, mc_samples, seed, |v| auction.counted_revenue(v));
    Ok((empirical - truth.mean).abs())
}

/// `ceil(c (h/eps)^2 (d ln(h/eps) + ln(1/delta)))`.
pub fn sample_size_bound(h: f64, epsilon: f64, delta: f64, pseudo_dim: u64, constant: f64) -> Result<u64> {
    if !(h > 0.0 && epsilon > 0.0 && delta > 0.0 && delta < 1.0 && constant > 0.0) {
        return Err(Error::InvalidParameter("h, epsilon, constant must be positive and delta in (0, 1)".into()));
    }
    let r = h / epsilon;
    let m = constant * r * r * (pseudo_dim as f64 * r.ln() + (1.0 / delta).ln());
    Ok(m.max(0.0).ceil() as u64)
}

/// `nt ln(nt)` scale of the single-item t-level pseudo-dimension, at least 1.
pub fn pseudo_dim_scale(n: usize, t: usize) -> u64 {
    let nt = (n * t) as f64;
    (nt * nt.ln()).ceil().max(1.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidatePolicy {
    SampleValues,
    SampleValuesPlusGrid { step: f64 },
}

fn default_restarts() -> usize {
    32
}

fn default_rounds() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchStrategy {
    Exhaustive,
    CoordinateAscent {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_rounds")]
        max_rounds: usize,
    },
}

impl SearchStrategy {
    pub fn ascent() -> Self {
        SearchStrategy::CoordinateAscent { restarts: default_restarts(), max_rounds: default_rounds() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub t: usize,
    #[serde(default = "LearnerConfig::default_candidates")]
    pub candidates: CandidatePolicy,
    #[serde(default = "LearnerConfig::default_strategy")]
    pub strategy: SearchStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    pub seed: u64,
}

impl LearnerConfig {
    fn default_candidates() -> CandidatePolicy {
        CandidatePolicy::SampleValues
    }

    fn default_strategy() -> SearchStrategy {
        SearchStrategy::Exhaustive
    }

    pub fn exhaustive(t: usize, seed: u64) -> Self {
        LearnerConfig {
            t,
            candidates: CandidatePolicy::SampleValues,
            strategy: SearchStrategy::Exhaustive,
            truncation: None,
            seed,
        }
    }
}

/// Sorted distinct candidate thresholds for each bidder.
pub fn candidate_sets(samples: &SampleSet, policy: &CandidatePolicy) -> Result<Vec<Vec<f64>>> {
    (0..samples.n())
        .map(|i| {
            let mut c = samples.column(i);
            if let CandidatePolicy::SampleValuesPlusGrid { step } = policy {
                if !(*step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
                }
                let top = c.iter().copied().fold(0.0, f64::max);
                let k_max = (top / step).ceil() as usize;
                c.extend((0..=k_max).map(|k| k as f64 * step));
            }
            c.sort_by(f64::total_cmp);
            c.dedup();
            Ok(c)
        })
        .collect()
}

/// `C(c + t - 1, t)`: nondecreasing `t`-tuples from `c` candidates, saturating.
pub fn multiset_count(c: usize, t: usize) -> u128 {
    let mut r: u128 = 1;
    for k in 0..t as u128 {
        r = r.saturating_mul(c as u128 + k) / (k + 1);
        if r > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    r
}

/// All nondecreasing index tuples of length `t` over `0..c`, in lexicographic order.
pub fn nondecreasing_tuples(c: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if c == 0 {
        return out;
    }
    let mut cur = vec![0usize; t];
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..t).rev().find(|&p| cur[p] + 1 < c) else { break };
        let v = cur[pos] + 1;
        for x in &mut cur[pos..] {
            *x = v;
        }
    }
    out
}

/// Result of a learning run.
#[derive(Debug, Clone)]
pub struct Learned {
    pub auction: TLevelAuction,
    pub empirical_value: f64,
    /// Auctions evaluated during the search.
    pub evaluated: u64,
}

fn sum_revenue(auction: &TLevelAuction, samples: &SampleSet) -> f64 {
    samples.rows().map(|v| auction.counted_revenue(v)).sum()
}

/// Empirical revenue maximization over t-level auctions whose thresholds
/// come from the configured candidate sets. Ties go to the
/// lexicographically smallest threshold matrix.
pub fn erm(samples: &SampleSet, env: &Environment, config: &LearnerConfig) -> Result<Learned> {
    let n = samples.n();
    if env.n() != n {
        return Err(Error::InvalidParameter(format!("environment has {} bidders but samples have {n}", env.n())));
    }
    if config.t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    let cands = candidate_sets(samples, &config.candidates)?;
    let phi = match env {
        Environment::Explicit { .. } => Some((0..config.t).map(|k| k as f64).collect()),
        _ => None,
    };
    let init: Vec<Vec<f64>> = cands.iter().map(|c| vec![c[0]; config.t]).collect();
    let base = TLevelAuction::new(init, (0..n).collect(), env.clone(), phi)?.with_truncation(config.truncation)?;
    let (auction, evaluated) = match config.strategy {
        SearchStrategy::Exhaustive => exhaustive(samples, &cands, base, config.t)?,
        SearchStrategy::CoordinateAscent { restarts, max_rounds } => {
            coordinate_ascent(samples, &cands, base, config.t, restarts, max_rounds, config.seed)
        }
    };
    let empirical_value = empirical_revenue(&auction, samples)?;
    Ok(Learned { auction, empirical_value, evaluated })
}

fn exhaustive(samples: &SampleSet, cands: &[Vec<f64>], mut base: TLevelAuction, t: usize) -> Result<(TLevelAuction, u64)> {
    let total = cands
        .iter()
        .map(|c| multiset_count(c.len(), t))
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .unwrap_or(u128::MAX);
    if total > MAX_ENUMERATION {
        return Err(Error::Guard(format!(
            "exhaustive search would enumerate {total} auctions (limit {MAX_ENUMERATION}); use fewer samples, a smaller t, or coordinate ascent"
        )));
    }

    // One bidder alone always pays her lowest threshold, so only that
    // threshold matters and the smallest matrix repeats it.
    if samples.n() == 1 && matches!(base.env(), Environment::SingleItem { .. }) {
        let mut col = samples.column(0);
        col.sort_by(f64::total_cmp);
        let cap = base.truncation().unwrap_or(f64::INFINITY);
        let m = col.len();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &r in &cands[0] {
            let sold = m - col.partition_point(|&v| v < r);
            let value = r.min(cap) * sold as f64;
            if value > best.0 {
                best = (value, r);
            }
        }
        base.set_row(0, &vec![best.1; t]);
        return Ok((base, total as u64));
    }

    let tuples: Vec<Vec<Vec<usize>>> = cands.iter().map(|c| nondecreasing_tuples(c.len(), t)).collect();
    let radix: Vec<u64> = tuples.iter().map(|x| x.len() as u64).collect();
    let apply = |a: &mut TLevelAuction, mut k: u64| {
        let mut row = vec![0.0; t];
        for i in (0..radix.len()).rev() {
            let tup = &tuples[i][(k % radix[i]) as usize];
            k /= radix[i];
            for (x, &c) in row.iter_mut().zip(tup) {
                *x = cands[i][c];
            }
            a.set_row(i, &row);
        }
    };
    let (value, index) = (0..total as u64)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |a, k| {
                apply(a, k);
                (sum_revenue(a, samples), k)
            },
        )
        .reduce_with(|x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
        .expect("at least one candidate auction");
    debug_assert!(value.is_finite());
    apply(&mut base, index);
    Ok((base, total as u64))
}

/// Thresholds compare lexicographically in row-major order.
fn lex_less(a: &TLevelAuction, b: &TLevelAuction) -> bool {
    for (x, y) in a.thresholds().iter().flatten().zip(b.thresholds().iter().flatten()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn coordinate_ascent(
    samples: &SampleSet,
    cands: &[Vec<f64>],
    base: TLevelAuction,
    t: usize,
    restarts: usize,
    max_rounds: usize,
    seed: u64,
) -> (TLevelAuction, u64) {
    let n = samples.n();
    let results: Vec<(f64, TLevelAuction, u64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = chunk_rng(seed, r as u64);
            let mut a = base.clone();
            let mut idx: Vec<Vec<usize>> = cands
                .iter()
                .map(|c| {
                    let mut row: Vec<usize> = (0..t).map(|_| rng.gen_range(0..c.len())).collect();
                    row.sort_unstable();
                    row
                })
                .collect();
            let set = |a: &mut TLevelAuction, i: usize, row: &[usize]| {
                let vals: Vec<f64> = row.iter().map(|&c| cands[i][c]).collect();
                a.set_row(i, &vals);
            };
            for i in 0..n {
                set(&mut a, i, &idx[i]);
            }
            let mut current = sum_revenue(&a, samples);
            let mut evaluated = 1u64;
            for _ in 0..max_rounds {
                let mut improved = false;
                for i in 0..n {
                    for tau in 0..t {
                        // The moved threshold may pass its neighbours; the row is re-sorted.
                        let mut best: Option<(f64, Vec<usize>)> = None;
                        for c in 0..cands[i].len() {
                            if c == idx[i][tau] {
                                continue;
                            }
                            let mut row = idx[i].clone();
                            row[tau] = c;
                            row.sort_unstable();
                            set(&mut a, i, &row);
                            let value = sum_revenue(&a, samples);
                            evaluated += 1;
                            if value > best.as_ref().map_or(current, |b| b.0) {
                                best = Some((value, row));
                            }
                        }
                        if let Some((value, row)) = best {
                            improved = true;
                            idx[i] = row;
                            current = value;
                        }
                        set(&mut a, i, &idx[i]);
                    }
                }
                if !improved {
                    break;
                }
            }
            (current, a, evaluated)
        })
        .collect();
    let evaluated = results.iter().map(|r| r.2).sum();
    let best = results
        .into_iter()
        .reduce(|x, y| if y.0 > x.0 || (y.0 == x.0 && lex_less(&y.1, &x.1)) { y } else { x })
        .expect("at least one restart");
    (best.1, evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(values: &[f64]) -> SampleSet {
        SampleSet::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn example_one() -> TLevelAuction {
        TLevelAuction::single_item(vec![
            vec![2.0, 4.0, 6.0, 8.0],
            vec![1.5, 5.0, 9.0, 10.0],
            vec![1.7, 3.9, 6.0, 7.0],
        ])
        .unwrap()
    }

    #[test]
    fn empirical_revenue_examples() {
        let a = example_one();
        let s = SampleSet::from_rows(&[vec![3.0, 1.0, 1.0]]).unwrap();
        assert_eq!(empirical_revenue(&a, &s).unwrap(), 2.0);
        let s = SampleSet::from_rows(&[vec![3.0, 1.0, 1.0], vec![8.0, 10.0, 1.0]]).unwrap();
        assert_eq!(empirical_revenue(&a, &s).unwrap(), 5.0);
        let s = SampleSet::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(empirical_revenue(&a, &s).unwrap(), 0.0);
        assert!(empirical_revenue(&a, &single(&[1.0])).is_err());
    }

    #[test]
    fn sample_validation() {
        assert!(SampleSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(SampleSet::from_rows(&[vec![-1.0]]).is_err());
        assert!(SampleSet::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(matches!(SampleSet::new(2, vec![], SampleSource::Inline), Err(Error::NoSamples)));
    }

    #[test]
    fn erm_single_reserve_examples() {
        let env = Environment::single_item(1).unwrap();
        let cfg = LearnerConfig::exhaustive(1, 0);
        let out = erm(&single(&[0.6, 0.8]), &env, &cfg).unwrap();
        assert_eq!(out.auction.row(0), &[0.6]);
        assert!((out.empirical_value - 0.6).abs() < 1e-12);
        let out = erm(&single(&[0.5, 1.0]), &env, &cfg).unwrap();
        assert_eq!(out.auction.row(0), &[0.5]);
        assert_eq!(out.empirical_value, 0.5);
    }

    #[test]
    fn tuple_enumeration() {
        let tuples = nondecreasing_tuples(3, 2);
        assert_eq!(tuples, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]);
        assert_eq!(multiset_count(3, 2), 6);
        assert_eq!(multiset_count(20, 2), 210);
        assert_eq!(nondecreasing_tuples(4, 3).len() as u128, multiset_count(4, 3));
    }

    #[test]
    fn exhaustive_guard() {
        let rows: Vec<Vec<f64>> = (0..200).map(|k| vec![k as f64, (k * 7 % 13) as f64, (k * 5 % 17) as f64]).collect();
        let s = SampleSet::from_rows(&rows).unwrap();
        let env = Environment::single_item(3).unwrap();
        assert!(matches!(erm(&s, &env, &LearnerConfig::exhaustive(3, 0)), Err(Error::Guard(_))));
    }

    #[test]
    fn two_bidder_exhaustive_is_global_max() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 2.5], vec![4.0, 1.0], vec![3.0, 3.5]];
        let s = SampleSet::from_rows(&rows).unwrap();
        let env = Environment::single_item(2).unwrap();
        let out = erm(&s, &env, &LearnerConfig::exhaustive(2, 0)).unwrap();
        let cands = candidate_sets(&s, &CandidatePolicy::SampleValues).unwrap();
        let mut a = out.auction.clone();
        for r0 in nondecreasing_tuples(4, 2) {
            for r1 in nondecreasing_tuples(4, 2) {
                a.set_row(0, &[cands[0][r0[0]], cands[0][r0[1]]]);
                a.set_row(1, &[cands[1][r1[0]], cands[1][r1[1]]]);
                assert!(empirical_revenue(&a, &s).unwrap() <= out.empirical_value + 1e-12);
            }
        }
        let ascent = LearnerConfig { strategy: SearchStrategy::ascent(), ..LearnerConfig::exhaustive(2, 4) };
        let again = erm(&s, &env, &ascent).unwrap();
        assert!(again.empirical_value <= out.empirical_value + 1e-12);
        assert_eq!(erm(&s, &env, &ascent).unwrap().auction, again.auction);
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(sample_size_bound(2.0, 0.5, 0.1, 4, 1.0).unwrap(), 126);
        assert!(sample_size_bound(2.0, 0.5, 0.1, 8, 1.0).unwrap() > 126);
        assert!(sample_size_bound(2.0, 0.0, 0.1, 4, 1.0).is_err());
        assert_eq!(pseudo_dim_scale(1, 1), 1);
        assert_eq!(pseudo_dim_scale(2, 2), 6);
    }

    #[test]
    fn same_seed_gap_is_zero() {
        let prior = ProductPrior::iid(crate::ValuationDistribution::uniform(1.0, 2.0).unwrap(), 2).unwrap();
        let a = TLevelAuction::single_item(vec![vec![1.2, 1.6]; 2]).unwrap();
        let s = SampleSet::from_prior(&prior, 5000, 17).unwrap();
        assert_eq!(generalization_gap(&a, &s, &prior, 5000, 17).unwrap(), 0.0);
        assert!(generalization_gap(&a, &s, &prior, 5000, 18).unwrap() > 0.0);
    }
}
