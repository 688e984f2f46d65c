#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlevel_core::feasibility::{BidderSet, Environment, MatroidSpec};
use tlevel_core::{Outcome, TLevelAuction};

pub const STEP: f64 = 0.25;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lattice<R: Rng>(rng: &mut R, hi: u32) -> f64 {
    rng.gen_range(0..=hi) as f64 * STEP
}

pub fn random_thresholds<R: Rng>(rng: &mut R, n: usize, t: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..t).map(|_| lattice(rng, 24)).collect();
            row.sort_by(f64::total_cmp);
            row
        })
        .collect()
}

pub fn random_profile<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(0.5) { lattice(rng, 28) } else { rng.gen_range(0.0..7.0) })
        .collect()
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvFamily {
    SingleItem,
    Matroid,
    Explicit,
}

pub fn random_matroid<R: Rng>(rng: &mut R, n: usize) -> Environment {
    let spec = match rng.gen_range(0..3) {
        0 => MatroidSpec::Uniform { k: rng.gen_range(1..=n) },
        1 => {
            let blocks_n = rng.gen_range(1..=n);
            let mut blocks = vec![Vec::new(); blocks_n];
            for i in 0..n {
                blocks[if i < blocks_n { i } else { rng.gen_range(0..blocks_n) }].push(i);
            }
            let capacities = blocks.iter().map(|b| rng.gen_range(1..=b.len())).collect();
            MatroidSpec::Partition { blocks, capacities }
        }
        _ => {
            let vertices = rng.gen_range(2..=n + 1);
            let edges = (0..n).map(|_| (rng.gen_range(0..vertices), rng.gen_range(0..vertices))).collect();
            MatroidSpec::Graphic { edges }
        }
    };
    Environment::matroid(n, spec).unwrap()
}

pub fn random_explicit<R: Rng>(rng: &mut R, n: usize) -> Environment {
    let mut sets = vec![BidderSet::EMPTY];
    for _ in 0..rng.gen_range(1..=6) {
        let bits = rng.gen_range(1..(1u32 << n));
        sets.push(BidderSet::from_bits(bits));
    }
    Environment::explicit(n, sets).unwrap()
}

pub fn random_phi<R: Rng>(rng: &mut R, t: usize) -> Vec<f64> {
    let mut x = rng.gen_range(-2.0..1.0);
    (0..t)
        .map(|_| {
            x += rng.gen_range(0.1..1.5);
            x
        })
        .collect()
}

pub fn random_auction<R: Rng>(rng: &mut R, family: EnvFamily) -> TLevelAuction {
    let n = rng.gen_range(1..=6);
    let t = rng.gen_range(1..=4);
    let thresholds = random_thresholds(rng, n, t);
    let order = random_permutation(rng, n);
    let (env, phi) = match family {
        EnvFamily::SingleItem => (Environment::single_item(n).unwrap(), None),
        EnvFamily::Matroid => (random_matroid(rng, n), None),
        EnvFamily::Explicit => (random_explicit(rng, n), Some(random_phi(rng, t))),
    };
    TLevelAuction::new(thresholds, order, env, phi).unwrap()
}

/// Structural checks every outcome must pass.
pub fn check_outcome(a: &TLevelAuction, v: &[f64], o: &Outcome) -> Result<(), String> {
    let n = a.n();
    if o.payments.len() != n {
        return Err(format!("payment vector has length {}", o.payments.len()));
    }
    if !a.env().is_feasible(o.winners) {
        return Err(format!("winner set {:?} infeasible", o.winners.to_vec()));
    }
    let total: f64 = o.payments.iter().sum();
    if (total - o.revenue).abs() > 1e-9 {
        return Err(format!("revenue {} differs from payment sum {total}", o.revenue));
    }
    for i in 0..n {
        let p = o.payments[i];
        if o.winners.contains(i) {
            if !(p >= 0.0 && p <= v[i] + 1e-12) {
                return Err(format!("winner {i} pays {p} with value {}", v[i]));
            }
            if a.level_of(i, v[i]) < 0 {
                return Err(format!("winner {i} is below its first threshold"));
            }
            match o.paid_levels[i] {
                Some(k) if a.threshold(i, k) == p => {}
                other => return Err(format!("winner {i} pays {p}, paid level {other:?}")),
            }
        } else if p != 0.0 || o.paid_levels[i].is_some() {
            return Err(format!("loser {i} pays {p}"));
        }
    }
    if (a.revenue(v) - o.revenue).abs() > 1e-12 {
        return Err(format!("fast revenue {} differs from outcome revenue {}", a.revenue(v), o.revenue));
    }
    Ok(())
}

/// Each winner still wins when bidding exactly its payment and loses just below it.
pub fn check_critical_bids(a: &TLevelAuction, v: &[f64], o: &Outcome) -> Result<(), String> {
    let mut w = v.to_vec();
    for i in o.winners.iter() {
        let p = o.payments[i];
        w[i] = p;
        if !a.run(&w).winners.contains(i) {
            return Err(format!("winner {i} loses when bidding its payment {p}"));
        }
        if p > 0.0 {
            w[i] = p - 1e-7;
            if a.run(&w).winners.contains(i) {
                return Err(format!("winner {i} still wins just below its payment {p}"));
            }
        }
        w[i] = v[i];
    }
    Ok(())
}

/// Same thresholds and tie order under a 1-uniform matroid.
pub fn as_uniform_one(a: &TLevelAuction) -> TLevelAuction {
    let env = Environment::uniform_matroid(a.n(), 1).unwrap();
    TLevelAuction::new(a.thresholds(), a.tie_order().to_vec(), env, None).unwrap()
}
