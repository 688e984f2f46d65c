//! Threshold constructions that turn a prior into a t-level auction.
//!
//! Each builder picks a ladder of virtual-value targets and places bidder
//! `i`'s thresholds at the least values whose ironed virtual value reaches
//! those targets.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::distributions::{ProductPrior, VirtualValueCurve, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::feasibility::Environment;
use crate::mechanisms::TLevelAuction;

/// Largest number of levels the score-grid builder will produce.
pub const MAX_GRID_LEVELS: usize = 1_000_000;

fn default_one() -> f64 {
    1.0
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

/// Parameters of the bounded-support construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConstructionParams {
    /// Target relative revenue loss, in (0, 1).
    pub epsilon: f64,
    /// Scale at which the arithmetic band hands over to the geometric band.
    #[serde(default = "default_one")]
    pub alpha: f64,
    /// Lower bound on `P[max bid > alpha]`, in (0, 1].
    #[serde(default = "default_one")]
    pub gamma: f64,
    /// Support bound; defaults to the prior's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bound: Option<f64>,
    /// Arithmetic step parameter; defaults to `epsilon / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<f64>,
    /// Ironing grid; set by the caller rather than read from files.
    #[serde(skip, default = "default_grid")]
    pub grid_size: usize,
}

impl LevelConstructionParams {
    pub fn new(epsilon: f64) -> Self {
        LevelConstructionParams {
            epsilon,
            alpha: 1.0,
            gamma: 1.0,
            h_bound: None,
            epsilon_prime: None,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_prime.unwrap_or(self.epsilon / 2.0)
    }

    fn validate(&self, h: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        let ep = self.epsilon_prime();
        if !(ep > 0.0 && ep < 1.0) {
            return bad(format!("epsilon_prime must lie in (0, 1), got {ep}"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(h.is_finite() && h > 0.0) {
            return bad(format!("support bound must be positive and finite, got {h}"));
        }
        if self.alpha > h {
            return bad(format!("alpha = {} exceeds the support bound {h}", self.alpha));
        }
        Ok(())
    }
}

/// `ceil(x)` that ignores floating noise just above an integer.
fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Virtual-value targets of the bounded construction: 0, then steps of
/// `alpha * gamma * epsilon'` up to about `alpha`, then factors of
/// `1 + epsilon / 2` from `alpha` up to at least `h`.
pub fn bounded_targets(params: &LevelConstructionParams, h: f64) -> Result<Vec<f64>> {
    params.validate(h)?;
    let ep = params.epsilon_prime();
    let step = params.alpha * params.gamma * ep;
    let ratio = 1.0 + params.epsilon / 2.0;
    let arithmetic = ceil_tol(1.0 / (params.gamma * ep));
    let geometric = ceil_tol((h / params.alpha).ln() / ratio.ln());
    let mut targets = Vec::with_capacity(1 + arithmetic + geometric);
    targets.push(0.0);
    targets.extend((1..=arithmetic).map(|k| k as f64 * step));
    targets.extend((1..=geometric).map(|k| params.alpha * ratio.powi(k as i32)));
    Ok(targets)
}

/// Number of levels the bounded construction uses.
pub fn bounded_level_count(params: &LevelConstructionParams, h: f64) -> Result<usize> {
    bounded_targets(params, h).map(|t| t.len())
}

/// Thresholds at the inverse ironed virtual values of `targets`, clamped to
/// the support and made nondecreasing.
fn threshold_row(curve: &VirtualValueCurve, targets: &[f64]) -> Result<Vec<f64>> {
    let d = curve.distribution();
    let (lo, hi) = (d.support_lo(), d.support_hi());
    let mut row = Vec::with_capacity(targets.len());
    let mut prev = f64::NEG_INFINITY;
    for &target in targets {
        let l = curve.inverse_virtual(target).clamp(lo, hi).max(prev);
        if !l.is_finite() {
            return Err(Error::InvalidParameter(format!("virtual value {target} is never reached")));
        }
        row.push(l);
        prev = l;
    }
    Ok(row)
}

fn rows_for(prior: &ProductPrior, targets: &[f64], grid_size: usize) -> Result<Vec<Vec<f64>>> {
    prior.ironed_curves(grid_size)?.iter().map(|c| threshold_row(c, targets)).collect()
}

fn bound_of(prior: &ProductPrior, params: &LevelConstructionParams) -> Result<f64> {
    match params.h_bound {
        Some(h) => {
            prior.require_bounded()?;
            Ok(h)
        }
        None => prior.require_bounded(),
    }
}

/// Single-item t-level auction from the bounded construction.
pub fn build_bounded(prior: &ProductPrior, params: &LevelConstructionParams) -> Result<TLevelAuction> {
    let h = bound_of(prior, params)?;
    let targets = bounded_targets(params, h)?;
    let n = prior.n();
    TLevelAuction::new(rows_for(prior, &targets, params.grid_size)?, (0..n).collect(), Environment::single_item(n)?, None)
}

/// The bounded construction bound to a single-item or matroid environment.
pub fn build_matroid_levels(
    prior: &ProductPrior,
    env: &Environment,
    params: &LevelConstructionParams,
) -> Result<TLevelAuction> {
    if !env.is_matroid_like() {
        return Err(Error::InvalidEnvironment("matroid levels need a single-item or matroid environment".into()));
    }
    let single = build_bounded(prior, params)?;
    TLevelAuction::new(single.thresholds(), (0..prior.n()).collect(), env.clone(), None)
}

/// Solves `epsilon = x ln(1/x)` for `x` in `(0, 1/e)`.
pub fn solve_epsilon_prime(epsilon: f64) -> Result<f64> {
    let cap = (-1.0f64).exp();
    if !(epsilon > 0.0 && epsilon < cap) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1/e), got {epsilon}")));
    }
    let f = |x: f64| x * (1.0 / x).ln();
    let (mut lo, mut hi) = (0.0f64, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fraction of the max-bid mass that must lie above half the anchor.
pub fn anchor_tail_requirement(epsilon_prime: f64) -> f64 {
    1.0 - (-0.5f64).exp() - epsilon_prime
}

/// Samples needed for the anchor estimate to hold with probability `1 - delta`.
pub fn anchor_sample_requirement(epsilon_prime: f64, delta: f64) -> usize {
    ((1.0 / epsilon_prime).powi(2) * (1.0 / delta).ln()).ceil() as usize
}

/// Empirical anchor for an MHR prior, estimated from samples of the maximum bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhrAnchor {
    pub beta_hat: f64,
    /// Truncation level `2 * beta_hat * ln(1 / epsilon')`.
    pub eta: f64,
    pub epsilon_prime: f64,
    /// Fraction of samples at or above `beta_hat / 2`.
    pub empirical_tail: f64,
    pub samples: usize,
}

/// Largest `beta_hat` such that at least a `1 - 1/sqrt(e) - epsilon'`
/// fraction of `max_bids` is at or above `beta_hat / 2`.
pub fn estimate_anchor(max_bids: &[f64], epsilon_prime: f64, delta: f64) -> Result<MhrAnchor> {
    let need = anchor_tail_requirement(epsilon_prime);
    if !(epsilon_prime > 0.0 && need > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon_prime {epsilon_prime} leaves no tail mass")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let m = max_bids.len();
    if m == 0 {
        return Err(Error::NoSamples);
    }
    if let Some(x) = max_bids.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidParameter(format!("max-bid sample {x} is not a finite nonnegative value")));
    }
    let required = anchor_sample_requirement(epsilon_prime, delta);
    if m < required {
        warn!("anchor estimated from {m} samples; {required} are needed for confidence 1 - {delta}");
    }
    let mut sorted = max_bids.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] == sorted[m - 1] {
        warn!("all max-bid samples equal {}; anchor is degenerate", sorted[0]);
    }
    let k = ((need * m as f64 - 1e-9).ceil() as usize).clamp(1, m);
    let g = sorted[k - 1];
    let at_or_above = sorted.partition_point(|&x| x >= g);
    let beta_hat = 2.0 * g;
    Ok(MhrAnchor {
        beta_hat,
        eta: 2.0 * beta_hat * (1.0 / epsilon_prime).ln(),
        epsilon_prime,
        empirical_tail: at_or_above as f64 / m as f64,
        samples: m,
    })
}

/// Truncated t-level auction for MHR priors, anchored at `anchor`.
///
/// Runs the bounded construction at accuracy `epsilon'` with `alpha = beta_hat / 2`,
/// `gamma = 1 - 1/sqrt(e) - epsilon'` and `eta` in place of the support bound.
pub fn build_mhr(prior: &ProductPrior, anchor: &MhrAnchor, epsilon: f64, grid_size: usize) -> Result<TLevelAuction> {
    let offenders = prior.non_mhr_bidders(grid_size);
    if !offenders.is_empty() {
        return Err(Error::NotMhr(offenders));
    }
    let ep = solve_epsilon_prime(epsilon)?;
    if (ep - anchor.epsilon_prime).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "anchor was estimated with epsilon' = {} but epsilon = {epsilon} gives {ep}",
            anchor.epsilon_prime
        )));
    }
    if !(anchor.beta_hat > 0.0) {
        return Err(Error::InvalidParameter("anchor must be positive".into()));
    }
    let params = LevelConstructionParams {
        epsilon: ep,
        alpha: anchor.beta_hat / 2.0,
        gamma: anchor_tail_requirement(ep),
        h_bound: Some(anchor.eta),
        epsilon_prime: None,
        grid_size,
    };
    let targets = bounded_targets(&params, anchor.eta)?;
    let n = prior.n();
    TLevelAuction::new(rows_for(prior, &targets, grid_size)?, (0..n).collect(), Environment::single_item(n)?, None)?
        .with_truncation(Some(anchor.eta))
}

/// Level scores `-h n, -h n + epsilon / n, ...` up to `h`.
pub fn phi_grid(n: usize, h: f64, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let nf = n as f64;
    let steps = ceil_tol((h * nf * nf + h * nf) / epsilon);
    if steps + 1 > MAX_GRID_LEVELS {
        return Err(Error::Guard(format!("score grid would need {} levels", steps + 1)));
    }
    Ok((0..=steps).map(|k| -h * nf + k as f64 * epsilon / nf).collect())
}

/// Explicit-environment auction whose thresholds sit where each bidder's
/// ironed virtual value crosses the score grid.
pub fn build_phi_grid(prior: &ProductPrior, env: &Environment, epsilon: f64, grid_size: usize) -> Result<TLevelAuction> {
    if !matches!(env, Environment::Explicit { .. }) {
        return Err(Error::InvalidEnvironment("score-grid auctions need an explicit environment".into()));
    }
    let h = prior.require_bounded()?;
    let phi = phi_grid(prior.n(), h, epsilon)?;
    let n = prior.n();
    TLevelAuction::new(rows_for(prior, &phi, grid_size)?, (0..n).collect(), env.clone(), Some(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValuationDistribution;
    use crate::feasibility::BidderSet;

    fn uniform(lo: f64, hi: f64) -> ValuationDistribution {
        ValuationDistribution::uniform(lo, hi).unwrap()
    }

    #[test]
    fn level_count_example() {
        let p = LevelConstructionParams::new(0.1);
        assert_eq!(bounded_level_count(&p, 10.0).unwrap(), 1 + 20 + 48);
    }

    #[test]
    fn uniform_one_two_thresholds() {
        let prior = ProductPrior::iid(uniform(1.0, 2.0), 1).unwrap();
        let a = build_bounded(&prior, &LevelConstructionParams::new(0.5)).unwrap();
        // phi(v) = 2v - 2, so the threshold for target x is 1 + x / 2.
        let targets: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5625, 1.953125, 2.44140625];
        assert_eq!(a.t(), targets.len());
        for (l, x) in a.row(0).iter().zip(targets) {
            assert!((l - (1.0 + x / 2.0).min(2.0)).abs() < 1e-5, "{l} vs {x}");
        }
        assert_eq!(a.row(0)[0], 1.0);
    }

    #[test]
    fn parameter_errors() {
        let prior = ProductPrior::iid(uniform(0.0, 1.0), 2).unwrap();
        assert!(build_bounded(&prior, &LevelConstructionParams::new(1.0)).is_err());
        let mut p = LevelConstructionParams::new(0.2);
        p.alpha = 2.0;
        assert!(build_bounded(&prior, &p).is_err());
        let unbounded = ProductPrior::new(vec![ValuationDistribution::exponential(1.0).unwrap()], None).unwrap();
        assert!(build_bounded(&unbounded, &LevelConstructionParams::new(0.2)).is_err());
    }

    #[test]
    fn matroid_levels_match_single_item() {
        let prior = ProductPrior::iid(uniform(1.0, 2.0), 3).unwrap();
        let p = LevelConstructionParams::new(0.25);
        let single = build_bounded(&prior, &p).unwrap();
        let env = Environment::uniform_matroid(3, 1).unwrap();
        let m = build_matroid_levels(&prior, &env, &p).unwrap();
        assert_eq!(single.thresholds(), m.thresholds());
        let explicit = Environment::explicit(3, [BidderSet::EMPTY]).unwrap();
        assert!(build_matroid_levels(&prior, &explicit, &p).is_err());
    }

    #[test]
    fn epsilon_prime_uses_natural_log() {
        for eps in [0.05, 0.2, 0.3] {
            let x = solve_epsilon_prime(eps).unwrap();
            assert!((x * (1.0 / x).ln() - eps).abs() < 1e-12);
            assert!(x < (-1.0f64).exp());
        }
        assert!((solve_epsilon_prime(0.2).unwrap() - 0.0787).abs() < 5e-4);
        assert!(solve_epsilon_prime(0.5).is_err());
    }

    #[test]
    fn tail_requirement_constant() {
        assert!((anchor_tail_requirement(0.1) - 0.2935).abs() < 1e-4);
    }

    #[test]
    fn anchor_on_constant_samples() {
        let a = estimate_anchor(&[6.0; 50], 0.1, 0.5).unwrap();
        assert_eq!(a.beta_hat, 12.0);
        assert!((a.eta - 24.0 * 10f64.ln()).abs() < 1e-12);
        assert_eq!(a.empirical_tail, 1.0);
        assert!(matches!(estimate_anchor(&[], 0.1, 0.5), Err(Error::NoSamples)));
    }

    #[test]
    fn anchor_is_the_largest_feasible_point() {
        let samples: Vec<f64> = (1..=100).map(f64::from).collect();
        let a = estimate_anchor(&samples, 0.05, 0.1).unwrap();
        let need = anchor_tail_requirement(0.05);
        // Independent scan over candidate half-anchors.
        let tail = |g: f64| samples.iter().filter(|&&x| x >= g).count() as f64 / 100.0;
        let best = samples.iter().copied().filter(|&g| tail(g) >= need).fold(f64::MIN, f64::max);
        assert_eq!(a.beta_hat, 2.0 * best);
        assert_eq!(best, 66.0);
        assert!(a.empirical_tail >= need);
    }

    #[test]
    fn mhr_build_completes() {
        let prior = ProductPrior::iid(ValuationDistribution::exponential(1.0).unwrap(), 2).unwrap();
        let ep = solve_epsilon_prime(0.3).unwrap();
        let max_bids: Vec<f64> = crate::montecarlo::draw_profiles(&prior, 10_000, 9)
            .chunks(2)
            .map(|r| r[0].max(r[1]))
            .collect();
        let anchor = estimate_anchor(&max_bids, ep, 0.1).unwrap();
        let a = build_mhr(&prior, &anchor, 0.3, 1024).unwrap();
        assert_eq!(a.truncation(), Some(anchor.eta));
        assert!(a.thresholds().iter().flatten().all(|x| x.is_finite()));
        let bimodal = ValuationDistribution::uniform_mixture(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let bad = ProductPrior::new(vec![uniform(0.0, 1.0), bimodal], Some(3.0)).unwrap();
        assert!(matches!(build_mhr(&bad, &anchor, 0.3, 1024), Err(Error::NotMhr(v)) if v == vec![1]));
    }

    #[test]
    fn phi_grid_example() {
        let phi = phi_grid(2, 1.0, 0.5).unwrap();
        assert_eq!(phi.len(), 13);
        assert_eq!(phi[0], -2.0);
        assert_eq!(phi[1], -1.75);
        assert_eq!(*phi.last().unwrap(), 1.0);
    }

    #[test]
    fn phi_grid_never_overestimates() {
        let prior = ProductPrior::iid(uniform(0.0, 1.0), 2).unwrap();
        let env = Environment::explicit(2, [BidderSet::EMPTY, BidderSet::singleton(0), BidderSet::singleton(1)]).unwrap();
        let a = build_phi_grid(&prior, &env, 0.5, 1024).unwrap();
        let curve = prior.bidder(0).iron(1024).unwrap();
        let phi = a.phi().unwrap();
        for k in 0..999 {
            let v = k as f64 / 999.0;
            let level = a.level_of(0, v);
            assert!(level >= 0);
            let gap = curve.ironed_value(v) - phi[level as usize];
            assert!((-1e-9..=0.25 + 1e-6).contains(&gap), "v = {v}, gap = {gap}");
        }
        let single = Environment::single_item(2).unwrap();
        assert!(build_phi_grid(&prior, &single, 0.5, 1024).is_err());
    }
}
