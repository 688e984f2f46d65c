//! t-level auctions for single-parameter environments.
//!
//! The crate covers the full pipeline: valuation priors with ironed
//! virtual values ([`distributions`]), feasibility environments
//! ([`feasibility`]), executable t-level and Myerson mechanisms
//! ([`mechanisms`]), threshold constructions from priors ([`levels`]),
//! empirical revenue maximization ([`learner`]), brute-force
//! shattering experiments ([`shattering`]) and the experiment harness
//! ([`harness`]).
//!
//! Bidders are 0-indexed everywhere in the library. File formats read
//! and written by [`harness`] use 1-indexed bidders.

pub mod distributions;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod learner;
pub mod levels;
pub mod mechanisms;
pub mod montecarlo;
pub mod shattering;

pub use distributions::{ProductPrior, ValuationDistribution, VirtualValueCurve};
pub use error::{Error, Result};
pub use feasibility::{BidderSet, Environment, MatroidSpec};
pub use mechanisms::{MyersonAuction, Outcome, PaymentCase, TLevelAuction};
pub use montecarlo::McEstimate;
