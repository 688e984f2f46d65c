use serde::{Deserialize, Serialize};

use super::{Outcome, PaymentCase};
use crate::error::{Error, Result};
use crate::feasibility::{BidderSet, EnvSpec, Environment, MAX_BIDDERS};

/// A t-level auction: `t` nondecreasing thresholds per bidder, a fixed tie
/// order, and the environment it allocates in.
///
/// A bidder's level is the index of the largest own threshold at or below
/// her bid, or -1 below all of them. Explicit environments additionally
/// carry a strictly increasing score per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AuctionSpec", into = "AuctionSpec")]
pub struct TLevelAuction {
    n: usize,
    t: usize,
    /// Row-major `n x t`.
    thresholds: Vec<f64>,
    tie_order: Vec<usize>,
    /// `tie_rank[i]` is bidder `i`'s position in `tie_order`.
    tie_rank: Vec<usize>,
    env: Environment,
    phi: Option<Vec<f64>>,
    truncation: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidAuction(msg.into())
}

fn check_row(i: usize, row: &[f64]) -> Result<()> {
    if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(invalid(format!("bidder {i}: threshold {x} must be finite and nonnegative")));
    }
    if row.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(format!("bidder {i}: thresholds must be nondecreasing")));
    }
    Ok(())
}

impl TLevelAuction {
    pub fn new(
        thresholds: Vec<Vec<f64>>,
        tie_order: Vec<usize>,
        env: Environment,
        phi: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = thresholds.len();
        if n == 0 || n > MAX_BIDDERS {
            return Err(invalid(format!("need 1..={MAX_BIDDERS} bidders, got {n}")));
        }
        if env.n() != n {
            return Err(invalid(format!("environment has {} bidders but thresholds have {n} rows", env.n())));
        }
        let t = thresholds[0].len();
        if t == 0 {
            return Err(invalid("need at least one threshold per bidder"));
        }
        for (i, row) in thresholds.iter().enumerate() {
            if row.len() != t {
                return Err(invalid(format!("bidder {i} has {} thresholds, expected {t}", row.len())));
            }
            check_row(i, row)?;
        }
        let mut tie_rank = vec![usize::MAX; n];
        if tie_order.len() != n {
            return Err(invalid("tie order must list every bidder once"));
        }
        for (r, &i) in tie_order.iter().enumerate() {
            if i >= n || tie_rank[i] != usize::MAX {
                return Err(invalid("tie order must be a permutation of the bidders"));
            }
            tie_rank[i] = r;
        }
        match (&env, &phi) {
            (Environment::Explicit { .. }, None) => {
                return Err(invalid("explicit environments require a level score vector"));
            }
            (Environment::Explicit { .. }, Some(p)) => {
                if p.len() != t {
                    return Err(invalid(format!("score vector has length {}, expected {t}", p.len())));
                }
                if p.iter().any(|x| !x.is_finite()) || p.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("score vector must be finite and strictly increasing"));
                }
            }
            (_, Some(_)) => return Err(invalid("level scores are only used by explicit environments")),
            _ => {}
        }
        Ok(TLevelAuction {
            n,
            t,
            thresholds: thresholds.concat(),
            tie_order,
            tie_rank,
            env,
            phi,
            truncation: None,
        })
    }

    /// Single-item auction with tie order `0, 1, ..., n-1`.
    pub fn single_item(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        let n = thresholds.len();
        Self::new(thresholds, (0..n).collect(), Environment::single_item(n.max(1))?, None)
    }

    pub fn with_truncation(mut self, eta: Option<f64>) -> Result<Self> {
        if let Some(e) = eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("truncation must be positive and finite, got {e}")));
            }
        }
        self.truncation = eta;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.thresholds[i * self.t..(i + 1) * self.t]
    }

    pub fn threshold(&self, i: usize, tau: usize) -> f64 {
        self.thresholds[i * self.t + tau]
    }

    pub fn thresholds(&self) -> Vec<Vec<f64>> {
        self.thresholds.chunks(self.t).map(<[f64]>::to_vec).collect()
    }

    /// Replaces bidder `i`'s row without revalidating the rest of the auction.
    pub(crate) fn set_row(&mut self, i: usize, row: &[f64]) {
        debug_assert!(check_row(i, row).is_ok());
        self.thresholds[i * self.t..(i + 1) * self.t].copy_from_slice(row);
    }

    pub fn tie_order(&self) -> &[usize] {
        &self.tie_order
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn phi(&self) -> Option<&[f64]> {
        self.phi.as_deref()
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// True when `a` precedes `b` in the tie order.
    pub fn prefers(&self, a: usize, b: usize) -> bool {
        self.tie_rank[a] < self.tie_rank[b]
    }

    /// Largest `tau` with `threshold(i, tau) <= v`, or -1.
    pub fn level_of(&self, i: usize, v: f64) -> i32 {
        self.row(i).partition_point(|&l| l <= v) as i32 - 1
    }

    pub fn run(&self, profile: &[f64]) -> Outcome {
        debug_assert_eq!(profile.len(), self.n);
        match self.env {
            Environment::SingleItem { .. } => self.run_single_item(profile),
            Environment::Matroid(_) => self.run_matroid(profile),
            Environment::Explicit { .. } => self.run_general(profile),
        }
    }

    /// Revenue on one profile, before truncation.
    pub fn revenue(&self, profile: &[f64]) -> f64 {
        match self.env {
            Environment::SingleItem { .. } => match self.single_item_sale(profile) {
                Some((w, tau, _)) => self.threshold(w, tau),
                None => 0.0,
            },
            _ => self.run(profile).revenue,
        }
    }

    /// Revenue on one profile, capped at the truncation level if one is set.
    pub fn counted_revenue(&self, profile: &[f64]) -> f64 {
        let r = self.revenue(profile);
        match self.truncation {
            Some(eta) => r.min(eta),
            None => r,
        }
    }

    /// Winner, paid threshold index and case of a single-item sale.
    fn single_item_sale(&self, profile: &[f64]) -> Option<(usize, usize, PaymentCase)> {
        let mut levels = [0i32; MAX_BIDDERS];
        let mut winner = usize::MAX;
        let (mut top, mut second) = (-1i32, -1i32);
        for (i, &v) in profile.iter().enumerate() {
            let l = self.level_of(i, v);
            levels[i] = l;
            if l > top {
                second = top;
                top = l;
            } else if l > second {
                second = l;
            }
            if l >= 0 && (winner == usize::MAX || l > levels[winner] || (l == levels[winner] && self.prefers(i, winner))) {
                winner = i;
            }
        }
        if top < 0 {
            return None;
        }
        if second < 0 {
            return Some((winner, 0, PaymentCase::Monop));
        }
        let bar = second as usize;
        if top == second {
            return Some((winner, bar, PaymentCase::Mult));
        }
        let dominant = (0..profile.len()).all(|j| j == winner || levels[j] < second || self.prefers(winner, j));
        Some((winner, if dominant { bar } else { bar + 1 }, PaymentCase::Unique))
    }

    /// Single item: highest level wins, ties by the tie order.
    pub fn run_single_item(&self, profile: &[f64]) -> Outcome {
        let mut out = Outcome::no_sale(self.n);
        if let Some((w, tau, case)) = self.single_item_sale(profile) {
            out.winners = BidderSet::singleton(w);
            out.payments[w] = self.threshold(w, tau);
            out.revenue = out.payments[w];
            out.paid_levels[w] = Some(tau);
            out.case = Some(case);
        }
        out
    }

    fn matroid_winners(&self, levels: &[i32]) -> BidderSet {
        let mut order: Vec<usize> = (0..self.n).filter(|&i| levels[i] >= 0).collect();
        order.sort_by(|&a, &b| levels[b].cmp(&levels[a]).then(self.tie_rank[a].cmp(&self.tie_rank[b])));
        let eligible: BidderSet = order.iter().copied().collect();
        self.env.greedy_by_order(eligible, &order).expect("matroid-like environment")
    }

    /// Matroids: greedy by (level, tie order) over bidders at level 0 or
    /// above. Each winner pays her least own threshold that still wins.
    pub fn run_matroid(&self, profile: &[f64]) -> Outcome {
        let levels: Vec<i32> = profile.iter().enumerate().map(|(i, &v)| self.level_of(i, v)).collect();
        let winners = self.matroid_winners(&levels);
        let mut payments = vec![0.0; self.n];
        let mut paid = vec![None; self.n];
        let mut trial = levels.clone();
        for i in winners.iter() {
            let wins_at = |tau: usize, trial: &mut Vec<i32>| {
                trial[i] = self.level_of(i, self.threshold(i, tau));
                let w = self.matroid_winners(trial).contains(i);
                trial[i] = levels[i];
                w
            };
            let (mut lo, mut hi) = (0usize, levels[i] as usize);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if wins_at(mid, &mut trial) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            payments[i] = self.threshold(i, lo);
            paid[i] = Some(lo);
        }
        Outcome::from_payments(winners, payments, paid)
    }

    /// Sum of level scores over `set`, in member order, with bidder `swap.0`
    /// placed at level `swap.1` if given.
    fn score(&self, set: BidderSet, levels: &[i32], swap: Option<(usize, usize)>) -> f64 {
        let phi = self.phi.as_deref().expect("explicit auctions carry scores");
        set.iter()
            .map(|j| match swap {
                Some((i, tau)) if i == j => phi[tau],
                _ => phi[levels[j] as usize],
            })
            .sum()
    }

    /// Explicit environments: no sale if any bidder is below level 0;
    /// otherwise the listed set with the highest score wins, ties toward the
    /// earliest set. Winner `i` pays the threshold of the lowest level at
    /// which the winning set still beats the best set without `i`.
    pub fn run_general(&self, profile: &[f64]) -> Outcome {
        let sets = self.env.explicit_sets().expect("explicit environment");
        let levels: Vec<i32> = profile.iter().enumerate().map(|(i, &v)| self.level_of(i, v)).collect();
        if levels.iter().any(|&l| l < 0) {
            return Outcome::no_sale(self.n);
        }
        let scores: Vec<f64> = sets.iter().map(|&s| self.score(s, &levels, None)).collect();
        let best = |skip: Option<usize>| {
            let mut b: Option<usize> = None;
            for (k, &s) in sets.iter().enumerate() {
                if skip.is_some_and(|i| s.contains(i)) {
                    continue;
                }
                if b.is_none_or(|b| scores[k] > scores[b]) {
                    b = Some(k);
                }
            }
            b.expect("the empty set is always listed")
        };
        let x = best(None);
        let winners = sets[x];
        let mut payments = vec![0.0; self.n];
        let mut paid = vec![None; self.n];
        for i in winners.iter() {
            let y = best(Some(i));
            let keeps = |tau: usize| {
                let s = self.score(winners, &levels, Some((i, tau)));
                s > scores[y] || (s == scores[y] && x < y)
            };
            let (mut lo, mut hi) = (0usize, levels[i] as usize);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if keeps(mid) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            payments[i] = self.threshold(i, lo);
            paid[i] = Some(lo);
        }
        Outcome::from_payments(winners, payments, paid)
    }

    pub fn to_spec(&self) -> AuctionSpec {
        AuctionSpec {
            thresholds: self.thresholds(),
            tie_order: self.tie_order.iter().map(|i| i + 1).collect(),
            env: self.env.to_spec(),
            phi: self.phi.clone(),
            truncation: self.truncation,
        }
    }
}

/// Auction file format. `tie_order` lists 1-indexed bidders, most preferred
/// first; it defaults to `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionSpec {
    pub thresholds: Vec<Vec<f64>>,
    #[serde(default)]
    pub tie_order: Vec<usize>,
    pub env: EnvSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

impl TryFrom<AuctionSpec> for TLevelAuction {
    type Error = Error;

    fn try_from(spec: AuctionSpec) -> Result<Self> {
        let n = spec.thresholds.len();
        let tie_order = if spec.tie_order.is_empty() {
            (0..n).collect()
        } else {
            spec.tie_order
                .iter()
                .map(|&i| if i == 0 || i > n { Err(invalid(format!("tie order entry {i} outside 1..={n}"))) } else { Ok(i - 1) })
                .collect::<Result<_>>()?
        };
        let env = spec.env.build(n)?;
        TLevelAuction::new(spec.thresholds, tie_order, env, spec.phi)?.with_truncation(spec.truncation)
    }
}

impl From<TLevelAuction> for AuctionSpec {
    fn from(a: TLevelAuction) -> Self {
        a.to_spec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{BidderSet, MatroidSpec};

    fn example_one() -> TLevelAuction {
        TLevelAuction::single_item(vec![
            vec![2.0, 4.0, 6.0, 8.0],
            vec![1.5, 5.0, 9.0, 10.0],
            vec![1.7, 3.9, 6.0, 7.0],
        ])
        .unwrap()
    }

    fn set(xs: &[usize]) -> BidderSet {
        xs.iter().copied().collect()
    }

    #[test]
    fn levels_use_closed_lower_ends() {
        let a = example_one();
        assert_eq!(a.level_of(0, 3.0), 0);
        assert_eq!(a.level_of(0, 1.9), -1);
        assert_eq!(a.level_of(0, 8.0), 3);
        assert_eq!(a.level_of(0, 2.0), 0);
    }

    #[test]
    fn example_one_payments() {
        let a = example_one();
        let cases = [
            ([3.0, 1.0, 1.0], 0, 2.0, PaymentCase::Monop),
            ([8.0, 10.0, 1.0], 0, 8.0, PaymentCase::Mult),
            ([8.0, 5.0, 4.0], 0, 4.0, PaymentCase::Unique),
            ([5.0, 5.0, 6.5], 2, 6.0, PaymentCase::Unique),
        ];
        for (v, w, p, case) in cases {
            let o = a.run(&v);
            assert_eq!(o.winners, BidderSet::singleton(w), "{v:?}");
            assert_eq!(o.payments[w], p, "{v:?}");
            assert_eq!(o.revenue, p);
            assert_eq!(o.case, Some(case));
            assert_eq!(a.revenue(&v), p);
        }
        assert_eq!(a.run(&[1.0, 1.0, 1.0]).winners, BidderSet::EMPTY);
    }

    #[test]
    fn one_uniform_matroid_matches_single_item() {
        let single = example_one();
        let m = TLevelAuction::new(
            single.thresholds(),
            vec![0, 1, 2],
            Environment::uniform_matroid(3, 1).unwrap(),
            None,
        )
        .unwrap();
        for v in [[3.0, 1.0, 1.0], [8.0, 10.0, 1.0], [8.0, 5.0, 4.0], [5.0, 5.0, 6.5]] {
            let (a, b) = (single.run(&v), m.run(&v));
            assert_eq!(a.winners, b.winners);
            assert_eq!(a.payments, b.payments);
        }
    }

    #[test]
    fn two_uniform_matroid_examples() {
        let a = TLevelAuction::new(
            vec![vec![1.0, 2.0]; 3],
            vec![0, 1, 2],
            Environment::uniform_matroid(3, 2).unwrap(),
            None,
        )
        .unwrap();
        // Either winner dropping to level 0 still outranks bidder 2, so
        // both pay their lowest threshold.
        let o = a.run(&[2.5, 2.5, 1.5]);
        assert_eq!(o.winners, set(&[0, 1]));
        assert_eq!(o.payments, vec![1.0, 1.0, 0.0]);
        let o = a.run(&[2.5, 2.5, 2.5]);
        assert_eq!(o.winners, set(&[0, 1]));
        assert_eq!(o.payments, vec![2.0, 2.0, 0.0]);
        let o = a.run(&[2.5, 1.5, 1.5]);
        assert_eq!(o.winners, set(&[0, 1]));
        assert_eq!(o.payments, vec![1.0, 1.0, 0.0]);
    }

    fn explicit(n: usize, sets: &[&[usize]]) -> Environment {
        Environment::explicit(n, sets.iter().map(|s| set(s))).unwrap()
    }

    #[test]
    fn general_no_sale_below_lowest_threshold() {
        let a = TLevelAuction::new(
            vec![vec![1.0, 2.0]; 3],
            vec![0, 1, 2],
            explicit(3, &[&[], &[0, 1], &[2]]),
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let o = a.run(&[5.0, 0.5, 5.0]);
        assert_eq!(o.winners, BidderSet::EMPTY);
        assert_eq!(o.revenue, 0.0);
    }

    #[test]
    fn general_payments_respect_set_tie_order() {
        // A tie between the winning set and the empty set goes to the empty
        // set, so level 0 is not enough to keep winning.
        let a = TLevelAuction::new(
            vec![vec![2.0, 5.0]],
            vec![0],
            explicit(1, &[&[], &[0]]),
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let o = a.run(&[6.0]);
        assert_eq!(o.winners, set(&[0]));
        assert_eq!(o.payments, vec![5.0]);
        assert_eq!(a.run(&[2.0]).winners, BidderSet::EMPTY);

        let a = TLevelAuction::new(
            vec![vec![2.0, 5.0], vec![3.0, 4.0]],
            vec![0, 1],
            explicit(2, &[&[], &[0], &[1]]),
            Some(vec![0.0, 1.0]),
        )
        .unwrap();
        let o = a.run(&[6.0, 3.5]);
        assert_eq!(o.winners, set(&[0]));
        assert_eq!(o.payments, vec![5.0, 0.0]);
    }

    #[test]
    fn validation() {
        assert!(TLevelAuction::single_item(vec![vec![2.0, 1.0]]).is_err());
        assert!(TLevelAuction::single_item(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(TLevelAuction::single_item(vec![vec![-1.0]]).is_err());
        let env = Environment::single_item(2).unwrap();
        assert!(TLevelAuction::new(vec![vec![1.0]; 2], vec![0, 0], env.clone(), None).is_err());
        assert!(TLevelAuction::new(vec![vec![1.0]; 2], vec![1, 0], env, Some(vec![0.0])).is_err());
        let ex = explicit(1, &[&[], &[0]]);
        assert!(TLevelAuction::new(vec![vec![1.0, 2.0]], vec![0], ex.clone(), None).is_err());
        assert!(TLevelAuction::new(vec![vec![1.0, 2.0]], vec![0], ex, Some(vec![1.0, 1.0])).is_err());
        assert!(example_one().with_truncation(Some(0.0)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = TLevelAuction::new(
            vec![vec![1.0, 2.0]; 4],
            vec![3, 1, 0, 2],
            Environment::matroid(
                4,
                MatroidSpec::Partition { blocks: vec![vec![0, 1], vec![2, 3]], capacities: vec![1, 1] },
            )
            .unwrap(),
            None,
        )
        .unwrap()
        .with_truncation(Some(3.0))
        .unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains(r#""tie_order":[4,2,1,3]"#), "{json}");
        let back: TLevelAuction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let bad = r#"{"thresholds":[[2,1]],"env":{"kind":"single_item"}}"#;
        assert!(serde_json::from_str::<TLevelAuction>(bad).is_err());
    }

    #[test]
    fn truncation_caps_counted_revenue() {
        let a = example_one().with_truncation(Some(5.0)).unwrap();
        assert_eq!(a.counted_revenue(&[8.0, 10.0, 1.0]), 5.0);
        assert_eq!(a.counted_revenue(&[3.0, 1.0, 1.0]), 2.0);
    }
}
