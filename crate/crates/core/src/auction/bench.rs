use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::bids::{Bid, BidSet};
use super::exact::wdp_exact;
use super::search::{wdp_stochastic, Budget};
use crate::error::Result;
use crate::isect::{
    trajectory_tiles, Bundle, GeometrySpec, IntersectionGeometry, PathKey, ReservationRequest, Side, TileSlot, Turn,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceKind {
    /// Requests on the default four-way box with arrivals spread over
    /// `horizon_s` seconds.
    Intersection { horizon_s: f64 },
    /// Bundles of uniformly drawn items.
    Random { items: u32, min_size: u32, max_size: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub bids: usize,
    pub kind: InstanceKind,
}

impl InstanceSpec {
    /// Intersection-like instance whose arrival window grows with the number
    /// of bids, as a busier approach spreads requests over a longer period.
    pub fn intersection(bids: usize) -> Self {
        InstanceSpec {
            bids,
            kind: InstanceKind::Intersection {
                horizon_s: (bids as f64 / 4.0).max(3.0),
            },
        }
    }
}

fn default_geometry() -> &'static IntersectionGeometry {
    static G: OnceLock<IntersectionGeometry> = OnceLock::new();
    G.get_or_init(|| IntersectionGeometry::four_way(&GeometrySpec::default(), 3).expect("default geometry"))
}

pub fn generate_instance<R: Rng + ?Sized>(spec: &InstanceSpec, rng: &mut R) -> BidSet {
    let values = Normal::new(100.0, 25.0).unwrap();
    let bids = (0..spec.bids as u64)
        .map(|vehicle| {
            let value = (values.sample(rng) as f64).max(0.0).round();
            let (request, bundle) = match spec.kind {
                InstanceKind::Intersection { horizon_s } => {
                    let g = default_geometry();
                    let key = loop {
                        let key = PathKey {
                            side: Side::from_index(rng.random_range(0..4)),
                            lane: rng.random_range(0..3),
                            turn: Turn::ALL[rng.random_range(0..3)],
                        };
                        if g.is_legal(key) {
                            break key;
                        }
                    };
                    let request = ReservationRequest {
                        vehicle,
                        arrival_time: 1.0 + rng.random_range(0.0..horizon_s),
                        arrival_speed: rng.random_range(4.0..14.0),
                        side: key.side,
                        lane: key.lane,
                        turn: key.turn,
                        bid: Some(value),
                    };
                    let bundle = trajectory_tiles(&request, g, 1.0).expect("legal request");
                    (request, bundle)
                }
                InstanceKind::Random { items, min_size, max_size } => {
                    let k = rng.random_range(min_size.max(1)..=max_size.max(min_size).max(1));
                    let tiles: Vec<TileSlot> = (0..k).map(|_| TileSlot::new(rng.random_range(0..items), 0)).collect();
                    let request = ReservationRequest {
                        vehicle,
                        arrival_time: 1.0,
                        arrival_speed: 1.0,
                        side: Side::South,
                        lane: 0,
                        turn: Turn::Straight,
                        bid: Some(value),
                    };
                    (request, Bundle::from_slots(tiles, (items as usize).div_ceil(64)))
                }
            };
            Bid { request, value, bundle }
        })
        .collect();
    BidSet::new(bids).expect("generated bids are valid")
}

/// Passes per second of the stochastic search on `bids`-bid intersection
/// instances, measured over roughly `duration`.
pub fn calibrate_passes(bids: usize, duration: Duration, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = generate_instance(&InstanceSpec::intersection(bids), &mut rng);
    let start = Instant::now();
    let mut passes = 0u64;
    while start.elapsed() < duration {
        wdp_stochastic(&set, Budget::Passes(10), 0.15, 0.5, &mut rng);
        passes += 10;
    }
    passes as f64 / start.elapsed().as_secs_f64()
}

/// Stochastic-over-exact value ratios for one bid count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRow {
    pub bids: usize,
    pub instances: usize,
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub mean: f64,
    /// Share of instances reaching 95% of the optimum.
    pub share_95: f64,
}

/// Runs both solvers on `instances` generated instances per bid count.
pub fn quality_table(
    bid_counts: &[usize],
    instances: usize,
    budget: Budget,
    wp: f64,
    np: f64,
    oracle_cap: usize,
    seed: u64,
) -> Result<(Vec<QualityRow>, Vec<f64>)> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &n in bid_counts {
        let mut ratios = Vec::with_capacity(instances);
        for k in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((n as u64) << 32 | k as u64);
            let set = generate_instance(&InstanceSpec::intersection(n), &mut rng);
            let exact = wdp_exact(&set, oracle_cap)?;
            let found = wdp_stochastic(&set, budget, wp, np, &mut rng);
            ratios.push(if exact.value > 0.0 { found.value / exact.value } else { 1.0 });
        }
        all.extend_from_slice(&ratios);
        rows.push(quality_row(n, ratios));
    }
    Ok((rows, all))
}

/// Stochastic-over-exact value ratio of every instance; the search on
/// instance `k` draws from stream `k` of `seed`.
pub fn quality_ratios(sets: &[BidSet], budget: Budget, wp: f64, np: f64, oracle_cap: usize, seed: u64) -> Result<Vec<f64>> {
    sets.iter()
        .enumerate()
        .map(|(k, set)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let exact = wdp_exact(set, oracle_cap)?;
            let found = wdp_stochastic(set, budget, wp, np, &mut rng);
            Ok(if exact.value > 0.0 { found.value / exact.value } else { 1.0 })
        })
        .collect()
}

/// Quantiles of a set of value ratios.
pub fn quality_row(bids: usize, mut ratios: Vec<f64>) -> QualityRow {
    ratios.sort_by(f64::total_cmp);
    let q = |p: f64| ratios[((ratios.len() - 1) as f64 * p).round() as usize];
    QualityRow {
        bids,
        instances: ratios.len(),
        min: ratios[0],
        p10: q(0.1),
        median: q(0.5),
        mean: ratios.iter().sum::<f64>() / ratios.len() as f64,
        share_95: ratios.iter().filter(|&&r| r >= 0.95 - 1e-12).count() as f64 / ratios.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_are_deterministic() {
        let spec = InstanceSpec::intersection(20);
        let a = generate_instance(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        let b = generate_instance(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.bids(), b.bids());
        assert!(a.bids().iter().all(|b| !b.bundle.is_empty()));
    }

    #[test]
    fn random_instances_respect_sizes() {
        let spec = InstanceSpec {
            bids: 30,
            kind: InstanceKind::Random { items: 50, min_size: 2, max_size: 4 },
        };
        let s = generate_instance(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(s.bids().iter().all(|b| (1..=4).contains(&b.bundle.len())));
    }

    #[test]
    fn small_quality_table() {
        let (rows, ratios) = quality_table(&[3, 8], 5, Budget::Passes(50), 0.15, 0.5, 24, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(ratios.len(), 10);
        assert!(ratios.iter().all(|&r| r <= 1.0 + 1e-9));
    }
}
