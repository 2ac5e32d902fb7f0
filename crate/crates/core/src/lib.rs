//! Sponsored-shopping position auctions with uniform-bidding autobidders.
//!
//! * [`model`]: instances, multipliers, bids, allocations, tie-breaking
//!   distributions.
//! * [`mechanisms`]: the bid-sorting allocation rule with GSP and VCG payments.
//! * [`solver`]: smoothed fixed-point search for autobidding equilibria.
//! * [`verifier`]: exact and tolerance-based equilibrium checks, plus a
//!   brute-force equilibrium oracle for tiny instances.
//! * [`poa`]: price-of-anarchy quantities and the structural checks behind
//!   the factor-2 bound.
//! * [`io`]: JSON instance/candidate files and random instance generation.

pub mod error;
pub mod fixtures;
pub mod io;
pub mod lp;
pub mod mechanisms;
pub mod model;
pub mod poa;
pub mod scalar;
pub mod solver;
pub mod verifier;

pub use error::{Error, Result};
pub use mechanisms::{
    allocate, bidder_value, counterfactual_optimal_bid_welfare, expected_outcome, gsp_payments, vcg_payments,
    PaymentBreakdown, TieRule, WelfareReport,
};
pub use model::{
    enumerate_valid_allocations, induce_bids, is_valid, prefix_set, Allocation, AuctionInstance, BidProfile,
    ItemId, Mechanism, MultiplierVector, TieBreakDistribution,
};
pub use scalar::{Rational, Scalar};
