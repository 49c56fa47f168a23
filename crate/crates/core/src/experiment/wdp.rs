//! Winner determination instances recorded from simulated auctions.

use crate::auction::BidSet;
use crate::engine::{collect_wdp_instances, Mode};
use crate::error::Result;
use crate::scenario::ScenarioDoc;

/// Bid-count ranges of the corpus, upper bound exclusive.
pub const SIZE_BUCKETS: [(usize, usize); 5] = [(3, 5), (5, 10), (10, 20), (20, 40), (40, 81)];

/// Auction instances met on `doc` under the auction policy for every rate in
/// `lambdas`, one run per rate. At most `per_bucket` instances are kept per
/// size bucket, spread evenly over the rounds that fall into it.
pub fn recorded_instances(doc: &ScenarioDoc, lambdas: &[f64], per_bucket: usize) -> Result<Vec<(usize, Vec<BidSet>)>> {
    let mut pools: Vec<Vec<BidSet>> = vec![Vec::new(); SIZE_BUCKETS.len()];
    for &lambda in lambdas {
        let mut d = doc.clone();
        d.run.mode = Mode::Ca;
        d.run.lambda_per_min = lambda;
        for set in collect_wdp_instances(&d)? {
            if let Some(b) = SIZE_BUCKETS.iter().position(|&(lo, hi)| (lo..hi).contains(&set.len())) {
                pools[b].push(set);
            }
        }
    }
    Ok(SIZE_BUCKETS
        .iter()
        .zip(pools)
        .map(|(&(lo, _), pool)| {
            let keep = pool.len().min(per_bucket);
            let picked = (0..keep).map(|k| pool[k * pool.len() / keep].clone()).collect();
            (lo, picked)
        })
        .collect())
}
