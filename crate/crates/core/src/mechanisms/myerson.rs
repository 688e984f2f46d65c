use super::Outcome;
use crate::distributions::{ProductPrior, VirtualValueCurve};
use crate::error::{Error, Result};
use crate::feasibility::{BidderSet, Environment};
use crate::montecarlo::{self, McEstimate};

/// Bisection tolerance for critical bids.
const PAYMENT_TOL: f64 = 1e-9;

/// Revenue-optimal auction for a product prior: allocate to the feasible
/// set with the largest total ironed virtual value.
#[derive(Debug, Clone)]
pub struct MyersonAuction {
    prior: ProductPrior,
    curves: Vec<VirtualValueCurve>,
    env: Environment,
}

impl MyersonAuction {
    pub fn new(prior: ProductPrior, env: Environment, grid_size: usize) -> Result<Self> {
        if prior.n() != env.n() {
            return Err(Error::InvalidEnvironment(format!(
                "prior has {} bidders but environment has {}",
                prior.n(),
                env.n()
            )));
        }
        let curves = prior.ironed_curves(grid_size)?;
        Ok(MyersonAuction { prior, curves, env })
    }

    pub fn prior(&self) -> &ProductPrior {
        &self.prior
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn curves(&self) -> &[VirtualValueCurve] {
        &self.curves
    }

    pub fn ironed_values(&self, profile: &[f64]) -> Vec<f64> {
        profile.iter().zip(&self.curves).map(|(&v, c)| c.ironed_value(v)).collect()
    }

    pub fn allocate(&self, profile: &[f64]) -> BidderSet {
        self.env.max_weight_feasible(&self.ironed_values(profile))
    }

    /// Total ironed virtual value of the winners.
    pub fn virtual_surplus(&self, profile: &[f64]) -> f64 {
        let phis = self.ironed_values(profile);
        let winners = self.env.max_weight_feasible(&phis);
        winners.iter().map(|i| phis[i]).sum()
    }

    /// Least bid at which bidder `i` still wins, others fixed, to within
    /// [`PAYMENT_TOL`]. Assumes `i` wins at `profile`.
    pub fn critical_bid(&self, profile: &[f64], i: usize) -> f64 {
        let mut trial = profile.to_vec();
        let mut wins = |b: f64| {
            trial[i] = b;
            self.allocate(&trial).contains(i)
        };
        let mut lo = self.prior.bidder(i).support_lo().min(profile[i]);
        let mut hi = profile[i];
        if wins(lo) {
            return lo;
        }
        while hi - lo > PAYMENT_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if wins(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Winners and critical-bid payments on one profile.
    pub fn run(&self, profile: &[f64]) -> Outcome {
        let winners = self.allocate(profile);
        let mut payments = vec![0.0; profile.len()];
        for i in winners.iter() {
            payments[i] = self.critical_bid(profile, i);
        }
        Outcome::from_payments(winners, payments, vec![None; profile.len()])
    }

    /// Expected revenue as the Monte Carlo mean of the winners' ironed
    /// virtual surplus.
    pub fn expected_revenue(&self, mc_samples: usize, seed: u64) -> Result<McEstimate> {
        if mc_samples < 100 {
            return Err(Error::InvalidParameter(format!("need at least 100 Monte Carlo samples, got {mc_samples}")));
        }
        Ok(montecarlo::estimate(&self.prior, mc_samples, seed, |v| self.virtual_surplus(v)))
    }
}
