//! Executable auctions: t-level auctions and the Myerson benchmark.

mod myerson;
mod tlevel;

use serde::{Deserialize, Serialize};

use crate::feasibility::BidderSet;

pub use myerson::MyersonAuction;
pub use tlevel::{AuctionSpec, TLevelAuction};

/// Which payment rule priced a single-item sale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentCase {
    /// Only the winner reached level 0; she pays her lowest threshold.
    Monop,
    /// The winner shares the top level with another bidder.
    Mult,
    /// The winner is alone at the top level.
    Unique,
}

/// Result of running an auction on one valuation profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub winners: BidderSet,
    /// Per-bidder payments; 0 for losers.
    pub payments: Vec<f64>,
    pub revenue: f64,
    /// For t-level auctions, the index of the threshold each winner pays.
    pub paid_levels: Vec<Option<usize>>,
    /// Payment case of a single-item sale.
    pub case: Option<PaymentCase>,
}

impl Outcome {
    pub fn no_sale(n: usize) -> Self {
        Outcome {
            winners: BidderSet::EMPTY,
            payments: vec![0.0; n],
            revenue: 0.0,
            paid_levels: vec![None; n],
            case: None,
        }
    }

    /// Builds an outcome from per-bidder payments; revenue sums them in bidder order.
    pub(crate) fn from_payments(winners: BidderSet, payments: Vec<f64>, paid_levels: Vec<Option<usize>>) -> Self {
        let revenue = payments.iter().sum();
        Outcome { winners, payments, revenue, paid_levels, case: None }
    }

    /// `"1;3"` style 1-indexed winner list.
    pub fn winner_list(&self) -> String {
        self.winners.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(";")
    }
}

/// Revenue counted against a cap of `eta`.
pub fn truncated_revenue(outcome: &Outcome, eta: f64) -> f64 {
    outcome.revenue.min(eta)
}
