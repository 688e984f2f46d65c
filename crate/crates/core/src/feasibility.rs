//! Feasibility environments: which sets of bidders may win together.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::chunk_rng;

/// Largest number of bidders representable in a [`BidderSet`].
pub const MAX_BIDDERS: usize = 32;

/// Largest number of bidders allowed in explicit environments.
pub const MAX_EXPLICIT_BIDDERS: usize = 16;

/// A set of 0-indexed bidders, stored as a bitmask.
///
/// Sets are ordered lexicographically by their sorted member lists, so the
/// empty set comes first and `{0, 2} < {0, 3} < {1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BidderSet(u32);

impl BidderSet {
    pub const EMPTY: BidderSet = BidderSet(0);

    pub fn from_bits(bits: u32) -> Self {
        BidderSet(bits)
    }

    pub fn singleton(i: usize) -> Self {
        BidderSet(1 << i)
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        if n >= 32 {
            BidderSet(u32::MAX)
        } else {
            BidderSet((1u32 << n) - 1)
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        BidderSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        BidderSet(self.0 & !(1 << i))
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: BidderSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for BidderSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = BidderSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl Ord for BidderSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for BidderSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for BidderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Anything that can answer independence queries over `{0..n-1}`.
pub trait IndependenceOracle {
    fn ground_size(&self) -> usize;
    fn is_independent(&self, set: BidderSet) -> bool;
}

/// Concrete matroid families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatroidSpec {
    /// Any set of at most `k` bidders.
    Uniform { k: usize },
    /// At most `capacities[b]` winners from each block `blocks[b]`.
    Partition { blocks: Vec<Vec<usize>>, capacities: Vec<usize> },
    /// Bidder `i` owns edge `edges[i]`; winners must form a forest.
    Graphic { edges: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matroid {
    n: usize,
    spec: MatroidSpec,
    /// Block index of each bidder (partition matroids).
    block_of: Vec<usize>,
    vertices: usize,
}

impl Matroid {
    pub fn new(n: usize, spec: MatroidSpec) -> Result<Self> {
        if n == 0 || n > MAX_BIDDERS {
            return Err(Error::InvalidEnvironment(format!("matroid needs 1..={MAX_BIDDERS} bidders, got {n}")));
        }
        let mut block_of = Vec::new();
        let mut vertices = 0;
        match &spec {
            MatroidSpec::Uniform { k } => {
                if *k > n {
                    return Err(Error::InvalidEnvironment(format!("uniform matroid rank {k} exceeds n = {n}")));
                }
            }
            MatroidSpec::Partition { blocks, capacities } => {
                if blocks.len() != capacities.len() {
                    return Err(Error::InvalidEnvironment("one capacity per block required".into()));
                }
                block_of = vec![usize::MAX; n];
                for (b, block) in blocks.iter().enumerate() {
                    for &i in block {
                        if i >= n || block_of[i] != usize::MAX {
                            return Err(Error::InvalidEnvironment(format!(
                                "bidder {i} is out of range or appears in two blocks"
                            )));
                        }
                        block_of[i] = b;
                    }
                }
                if block_of.contains(&usize::MAX) {
                    return Err(Error::InvalidEnvironment("partition blocks must cover every bidder".into()));
                }
            }
            MatroidSpec::Graphic { edges } => {
                if edges.len() != n {
                    return Err(Error::InvalidEnvironment(format!(
                        "graphic matroid needs one edge per bidder, got {} edges for {n} bidders",
                        edges.len()
                    )));
                }
                vertices = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
            }
        }
        Ok(Matroid { n, spec, block_of, vertices })
    }

    pub fn spec(&self) -> &MatroidSpec {
        &self.spec
    }
}

impl IndependenceOracle for Matroid {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn is_independent(&self, set: BidderSet) -> bool {
        match &self.spec {
            MatroidSpec::Uniform { k } => set.len() <= *k,
            MatroidSpec::Partition { capacities, .. } => {
                let mut used = vec![0usize; capacities.len()];
                set.iter().all(|i| {
                    let b = self.block_of[i];
                    used[b] += 1;
                    used[b] <= capacities[b]
                })
            }
            MatroidSpec::Graphic { edges } => {
                let mut parent: Vec<usize> = (0..self.vertices).collect();
                fn find(p: &mut [usize], mut x: usize) -> usize {
                    while p[x] != x {
                        p[x] = p[p[x]];
                        x = p[x];
                    }
                    x
                }
                set.iter().all(|i| {
                    let (a, b) = edges[i];
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra == rb {
                        return false;
                    }
                    parent[ra] = rb;
                    true
                })
            }
        }
    }
}

/// The feasible winner sets of an auction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Environment {
    /// At most one winner.
    SingleItem { n: usize },
    Matroid(Matroid),
    /// A literal list of feasible sets, always containing the empty set.
    /// Stored sorted in lexicographic set order, which is the fixed tie order.
    Explicit { n: usize, sets: Vec<BidderSet> },
}

impl Environment {
    pub fn single_item(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_BIDDERS {
            return Err(Error::InvalidEnvironment(format!("need 1..={MAX_BIDDERS} bidders, got {n}")));
        }
        Ok(Environment::SingleItem { n })
    }

    pub fn matroid(n: usize, spec: MatroidSpec) -> Result<Self> {
        Ok(Environment::Matroid(Matroid::new(n, spec)?))
    }

    pub fn uniform_matroid(n: usize, k: usize) -> Result<Self> {
        Self::matroid(n, MatroidSpec::Uniform { k })
    }

    pub fn explicit(n: usize, sets: impl IntoIterator<Item = BidderSet>) -> Result<Self> {
        if n == 0 || n > MAX_EXPLICIT_BIDDERS {
            return Err(Error::InvalidEnvironment(format!(
                "explicit environments support 1..={MAX_EXPLICIT_BIDDERS} bidders, got {n}"
            )));
        }
        let mut sets: Vec<BidderSet> = sets.into_iter().collect();
        let full = BidderSet::full(n);
        if let Some(bad) = sets.iter().find(|s| !s.is_subset(full)) {
            return Err(Error::InvalidEnvironment(format!("set {bad:?} mentions a bidder outside 0..{n}")));
        }
        if !sets.contains(&BidderSet::EMPTY) {
            return Err(Error::InvalidEnvironment("the empty set must be feasible".into()));
        }
        sets.sort();
        sets.dedup();
        Ok(Environment::Explicit { n, sets })
    }

    pub fn n(&self) -> usize {
        match self {
            Environment::SingleItem { n } | Environment::Explicit { n, .. } => *n,
            Environment::Matroid(m) => m.n,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Environment::SingleItem { .. } => "single_item",
            Environment::Matroid(_) => "matroid",
            Environment::Explicit { .. } => "explicit",
        }
    }

    /// Single-item and matroid environments support greedy allocation.
    pub fn is_matroid_like(&self) -> bool {
        !matches!(self, Environment::Explicit { .. })
    }

    pub fn is_feasible(&self, set: BidderSet) -> bool {
        if !set.is_subset(BidderSet::full(self.n())) {
            return false;
        }
        match self {
            Environment::SingleItem { .. } => set.len() <= 1,
            Environment::Matroid(m) => m.is_independent(set),
            Environment::Explicit { sets, .. } => sets.binary_search(&set).is_ok(),
        }
    }

    /// Scans `order` and keeps each eligible bidder whose addition stays feasible.
    pub fn greedy_by_order(&self, eligible: BidderSet, order: &[usize]) -> Result<BidderSet> {
        match self {
            Environment::Explicit { .. } => Err(Error::GreedyUndefined),
            Environment::SingleItem { .. } => {
                Ok(order.iter().find(|&&i| eligible.contains(i)).map_or(BidderSet::EMPTY, |&i| BidderSet::singleton(i)))
            }
            Environment::Matroid(m) => {
                let mut chosen = BidderSet::EMPTY;
                for &i in order {
                    if eligible.contains(i) && !chosen.contains(i) && m.is_independent(chosen.with(i)) {
                        chosen.insert(i);
                    }
                }
                Ok(chosen)
            }
        }
    }

    /// A feasible set of maximum total weight.
    ///
    /// Single item: the heaviest bidder if its weight is positive. Matroids:
    /// greedy over positive weights in decreasing order, equal weights by
    /// index. Explicit: exhaustive scan of the listed sets, ties resolved
    /// toward the lexicographically smallest set.
    pub fn max_weight_feasible(&self, weights: &[f64]) -> BidderSet {
        debug_assert_eq!(weights.len(), self.n());
        match self {
            Environment::SingleItem { .. } => {
                let mut best: Option<usize> = None;
                for (i, &w) in weights.iter().enumerate() {
                    if w > 0.0 && best.is_none_or(|b| w > weights[b]) {
                        best = Some(i);
                    }
                }
                best.map_or(BidderSet::EMPTY, BidderSet::singleton)
            }
            Environment::Matroid(m) => {
                let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
                order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
                let mut chosen = BidderSet::EMPTY;
                for i in order {
                    if m.is_independent(chosen.with(i)) {
                        chosen.insert(i);
                    }
                }
                chosen
            }
            Environment::Explicit { sets, .. } => {
                let mut best = BidderSet::EMPTY;
                let mut best_w = f64::NEG_INFINITY;
                for &s in sets {
                    let w = set_weight(s, weights);
                    if w > best_w {
                        best = s;
                        best_w = w;
                    }
                }
                best
            }
        }
    }

    /// Listed sets of an explicit environment in tie order.
    pub fn explicit_sets(&self) -> Option<&[BidderSet]> {
        match self {
            Environment::Explicit { sets, .. } => Some(sets),
            _ => None,
        }
    }

    pub fn to_spec(&self) -> EnvSpec {
        let one = |s: &[usize]| s.iter().map(|i| i + 1).collect::<Vec<_>>();
        match self {
            Environment::SingleItem { .. } => EnvSpec::SingleItem,
            Environment::Matroid(m) => match &m.spec {
                MatroidSpec::Uniform { k } => EnvSpec::UniformMatroid { k: *k },
                MatroidSpec::Partition { blocks, capacities } => EnvSpec::PartitionMatroid {
                    blocks: blocks.iter().map(|b| one(b)).collect(),
                    capacities: capacities.clone(),
                },
                MatroidSpec::Graphic { edges } => EnvSpec::GraphicMatroid {
                    edges: edges.iter().map(|&(a, b)| [a, b]).collect(),
                },
            },
            Environment::Explicit { sets, .. } => EnvSpec::Explicit {
                sets: sets.iter().map(|s| one(&s.to_vec())).collect(),
            },
        }
    }
}

/// Sum of member weights, accumulated in increasing member order.
pub fn set_weight(set: BidderSet, weights: &[f64]) -> f64 {
    set.iter().map(|i| weights[i]).sum()
}

/// Environment description as stored in JSON files. Bidders are 1-indexed;
/// graphic-matroid edges name arbitrary 0-indexed vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    SingleItem,
    UniformMatroid { k: usize },
    PartitionMatroid { blocks: Vec<Vec<usize>>, capacities: Vec<usize> },
    GraphicMatroid { edges: Vec<[usize; 2]> },
    Explicit { sets: Vec<Vec<usize>> },
}

impl EnvSpec {
    pub fn build(&self, n: usize) -> Result<Environment> {
        let zero = |s: &[usize]| -> Result<Vec<usize>> {
            s.iter()
                .map(|&i| {
                    if i == 0 || i > n {
                        Err(Error::InvalidEnvironment(format!("bidder index {i} outside 1..={n}")))
                    } else {
                        Ok(i - 1)
                    }
                })
                .collect()
        };
        match self {
            EnvSpec::SingleItem => Environment::single_item(n),
            EnvSpec::UniformMatroid { k } => Environment::uniform_matroid(n, *k),
            EnvSpec::PartitionMatroid { blocks, capacities } => Environment::matroid(
                n,
                MatroidSpec::Partition {
                    blocks: blocks.iter().map(|b| zero(b)).collect::<Result<_>>()?,
                    capacities: capacities.clone(),
                },
            ),
            EnvSpec::GraphicMatroid { edges } => Environment::matroid(
                n,
                MatroidSpec::Graphic { edges: edges.iter().map(|e| (e[0], e[1])).collect() },
            ),
            EnvSpec::Explicit { sets } => {
                let sets = sets
                    .iter()
                    .map(|s| zero(s).map(BidderSet::from_iter))
                    .collect::<Result<Vec<_>>>()?;
                Environment::explicit(n, sets)
            }
        }
    }
}

/// Maximum-weight independent set by exhaustive search; ties go to the
/// lexicographically smallest set.
pub fn exhaustive_max_weight(oracle: &dyn IndependenceOracle, weights: &[f64]) -> BidderSet {
    let n = oracle.ground_size();
    let mut best = BidderSet::EMPTY;
    let mut best_w = 0.0;
    for bits in 0..(1u32 << n) {
        let s = BidderSet(bits);
        if !oracle.is_independent(s) {
            continue;
        }
        let w = set_weight(s, weights);
        if w > best_w || (w == best_w && s < best) {
            best = s;
            best_w = w;
        }
    }
    best
}

/// Checks that the optimal set dominates every equal-size independent set
/// elementwise after sorting both by weight.
pub fn exchange_holds_for(oracle: &dyn IndependenceOracle, weights: &[f64]) -> bool {
    let n = oracle.ground_size();
    let sorted_weights = |s: BidderSet| {
        let mut w: Vec<f64> = s.iter().map(|i| weights[i]).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    };
    let opt = exhaustive_max_weight(oracle, weights);
    let opt_w = sorted_weights(opt);
    (0..(1u32 << n)).map(BidderSet).all(|b| {
        b.len() != opt.len()
            || !oracle.is_independent(b)
            || sorted_weights(b).iter().zip(&opt_w).all(|(wb, wo)| wo >= wb)
    })
}

/// Runs [`exchange_holds_for`] on `trials` random weight vectors in `[-1, 1)`.
pub fn verify_exchange_property(oracle: &dyn IndependenceOracle, trials: usize, seed: u64) -> Result<bool> {
    let n = oracle.ground_size();
    if n > 12 {
        return Err(Error::Guard(format!("exhaustive exchange check needs n <= 12, got {n}")));
    }
    let mut rng = chunk_rng(seed, 0);
    for _ in 0..trials {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if !exchange_holds_for(oracle, &w) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustively checks downward closure and the augmentation axiom.
pub fn satisfies_matroid_axioms(oracle: &dyn IndependenceOracle) -> bool {
    let n = oracle.ground_size();
    let all: Vec<BidderSet> = (0..(1u32 << n)).map(BidderSet).filter(|&s| oracle.is_independent(s)).collect();
    if !oracle.is_independent(BidderSet::EMPTY) {
        return false;
    }
    for &s in &all {
        for i in s.iter() {
            if !oracle.is_independent(s.without(i)) {
                return false;
            }
        }
    }
    for &a in &all {
        for &b in &all {
            if a.len() < b.len() && !b.iter().any(|i| !a.contains(i) && oracle.is_independent(a.with(i))) {
                return false;
            }
        }
    }
    true
}
