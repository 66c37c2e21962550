//! Numerical toolkit for descending price auctions with a bounded number of
//! price levels (k-DPA) and the batched prophet inequality they reduce to.
//!
//! The crate is organized around the reduction chain:
//!
//! * [`dist`]: continuous value laws, Myerson virtual values, and the induced
//!   reward law obtained by pushing a value law through its virtual-value map.
//! * [`prophet`]: the batched prophet inequality: selection polynomials,
//!   balanced threshold ladders, exact and Monte Carlo policy values, and a
//!   Bellman solver for optimal threshold ladders.
//! * [`equilibrium`]: the bidder-side maps between announced price ladders
//!   and the equilibrium stopping thresholds they induce, plus audits.
//! * [`auction`]: k-level price ladder constructions for revenue and welfare,
//!   auction simulation, and the offline benchmarks they are measured against.
//! * [`oracle`]: brute-force enumeration on small discrete instances, used as
//!   an independent check of everything above.
//!
//! All Monte Carlo entry points take an explicit 64-bit seed and derive one
//! counter-based substream per trial, so estimates are reproducible bit for
//! bit regardless of how many worker threads execute them.

// Validation predicates are written as negations (`!(a < b)`) on purpose:
// unlike the inverted operator, they also reject NaN operands.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod dist;
pub mod equilibrium;
pub mod mc;
pub mod oracle;
pub mod prophet;

pub(crate) mod combin;
pub(crate) mod quad;

pub use auction::{
    expected_outcome_mc, max_welfare, myerson_opt_revenue, revenue_prices, simulate_kdpa,
    welfare_prices, AuctionError, AuctionInstance, AuctionOutcome, OutcomeEstimate, Winner,
};
pub use dist::{
    check_regularity, conditional_mean, parse_dist_spec, DistError, RewardDistribution,
    ValueDistribution, VirtualValueTransform,
};
pub use equilibrium::{
    best_response_audit, bid_of, indifference_residual, prices_to_thresholds,
    thresholds_to_prices, thresholds_to_prices_multi, AuditReport, EquilibriumError,
    EquilibriumProfile, PriceSchedule,
};
pub use mc::McEstimate;
pub use oracle::{
    deviation_check_mc, exact_alg_enumeration, exact_opt_enumeration, DeviationReport,
    DiscreteDistribution, OracleError,
};
pub use prophet::{     alg_lower_bound_multi, balanced_thresholds_multi, balanced_thresholds_single, dp_solve,     exact_alg_single, expected_reward_mc, guarantee_multi, guarantee_single, opt_offline,     p_polynomial, selection_polynomials, simulate_policy, splus, DpSolution, ProphetError,     ProphetInstance, StageOutcome, ThresholdPolicy, };
