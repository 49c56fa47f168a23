//! Combinatorial auctions over intersection space-time tiles.

mod bench;
mod bids;
mod exact;
mod round;
mod search;

pub use bench::{
    calibrate_passes, generate_instance, quality_ratios, quality_row, quality_table, InstanceKind,
    InstanceSpec, QualityRow,
};
pub use bids::{validate_bid, Bid, BidSet, WinnerSet};
pub use exact::{wdp_exact, DEFAULT_ORACLE_CAP};
pub use round::{run_auction_round, BidHistory, RoundConfig, RoundOutcome};
pub use search::{wdp_stochastic, Budget, DEFAULT_NP, DEFAULT_PASSES, DEFAULT_WP, ONE_SECOND_PASSES};
