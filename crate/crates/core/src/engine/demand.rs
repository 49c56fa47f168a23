//! Seeded vehicle arrivals.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::config::{DemandMode, RunConfig};
use crate::driver::{sample_driver, DriverProfile, ProfileParams, TRACKED_ENDOWMENTS};
use crate::error::{Error, Result};
use crate::roadnet::{NetworkGraph, NodeId};
use crate::scenario::DemandDoc;

pub type OdPair = (NodeId, NodeId);

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d: Poisson<f64> = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// Arrivals during one tick of `dt` seconds. Under [`DemandMode::Aggregate`]
/// the whole network expects λ arrivals per 60 s, each on a uniformly drawn
/// pair; under [`DemandMode::PerPair`] every pair expects λ on its own.
pub fn spawn_poisson<R: Rng + ?Sized>(
    lambda_per_min: f64,
    pairs: &[OdPair],
    mode: DemandMode,
    rng: &mut R,
    dt: f64,
) -> Vec<OdPair> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let mean = lambda_per_min * dt / 60.0;
    match mode {
        DemandMode::Aggregate => (0..poisson(mean, rng))
            .map(|_| pairs[rng.random_range(0..pairs.len())])
            .collect(),
        DemandMode::PerPair => pairs
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, poisson(mean, rng) as usize))
            .collect(),
    }
}

/// Demand of a run: pairs sharing the `lambda_per_min` stream, plus pairs
/// with a rate of their own.
#[derive(Debug, Clone, Default)]
pub struct Demand {
    pub shared: Vec<OdPair>,
    pub fixed: Vec<(OdPair, f64)>,
    pub lambda_per_min: f64,
    pub mode: DemandMode,
}

impl Demand {
    /// Pairs listed in the document; without any, every ordered pair of
    /// distinct non-intersection nodes that can send and receive traffic.
    pub fn from_scenario(graph: &NetworkGraph, entries: &[DemandDoc], config: &RunConfig) -> Result<Demand> {
        let mut demand = Demand {
            lambda_per_min: config.lambda_per_min,
            mode: config.demand_mode,
            ..Default::default()
        };
        let node = |name: &str| {
            graph
                .node_id(name)
                .ok_or_else(|| Error::Schema(format!("demand references unknown node `{name}`")))
        };
        if entries.is_empty() {
            let terminals: Vec<NodeId> = (0..graph.nodes().len())
                .map(NodeId)
                .filter(|&n| !graph.is_intersection(n))
                .collect();
            for &o in &terminals {
                for &d in &terminals {
                    if o != d && !graph.out_links(o).is_empty() && !graph.in_links(d).is_empty() {
                        demand.shared.push((o, d));
                    }
                }
            }
            return Ok(demand);
        }
        for e in entries {
            let pair = (node(&e.origin)?, node(&e.destination)?);
            if pair.0 == pair.1 {
                return Err(Error::DegenerateOd(e.origin.clone()));
            }
            match (e.rate_per_min, e.count) {
                (Some(_), Some(_)) => {
                    return Err(Error::Schema(format!(
                        "demand {}->{}: give either `rate_per_min` or `count`",
                        e.origin, e.destination
                    )))
                }
                (Some(r), None) if r >= 0.0 && r.is_finite() => demand.fixed.push((pair, r)),
                (Some(r), None) => {
                    return Err(Error::NonPositive {
                        element: format!("demand {}->{}", e.origin, e.destination),
                        field: "rate_per_min",
                        value: r,
                    })
                }
                (None, Some(c)) => demand.fixed.push((pair, c as f64 * 60.0 / config.spawn_window_s)),
                (None, None) => demand.shared.push(pair),
            }
        }
        Ok(demand)
    }

    /// Arrivals for one tick.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64) -> Vec<OdPair> {
        let mut out = Vec::new();
        for &(pair, rate) in &self.fixed {
            out.extend(std::iter::repeat_n(pair, poisson(rate * dt / 60.0, rng) as usize));
        }
        out.extend(spawn_poisson(self.lambda_per_min, &self.shared, self.mode, rng, dt));
        out
    }
}

/// Driver for a new vehicle; a `tracked_fraction` share bids one of the
/// tracked endowments instead of a sampled valuation.
pub fn sample_profile<R: Rng + ?Sized>(rng: &mut R, od: OdPair, config: &RunConfig) -> DriverProfile {
    let mut p = sample_driver(rng, od, &ProfileParams::from(config));
    let u: f64 = rng.random();
    if u < config.tracked_fraction {
        let list: &[f64] = if config.tracked_endowments.is_empty() {
            &TRACKED_ENDOWMENTS
        } else {
            &config.tracked_endowments
        };
        p.valuation = list[rng.random_range(0..list.len())];
        p.tracked = true;
    }
    p
}
