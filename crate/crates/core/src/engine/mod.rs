//! Scenario orchestration.

mod config;
pub mod demand;
pub mod layout;
mod manager;
pub mod metrics;
mod micro;
mod network;
pub mod results;

pub use config::{DemandMode, Mode, RunConfig};
pub use demand::{spawn_poisson, Demand, OdPair};
pub use layout::{build_junctions, Junction};
pub use manager::{AuctionLogRow, Manager};
pub use metrics::{delay, moving_average_update, normalized_delay, MovingAverage};
pub use micro::{PlacedExit, Placement, PresetBooking};
pub use results::RunResults;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::auction::BidSet;
use crate::error::{Error, Result};
use crate::roadnet::{load_network, NetworkGraph};
use crate::scenario::ScenarioDoc;

/// Named sub-stream `id` of the master seed.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Which model a network gets: one intersection with nothing but its own
/// approaches and exits is run with car following; anything else with the
/// link-level model.
fn is_single_intersection(graph: &NetworkGraph) -> bool {
    match graph.intersections() {
        [c] => graph.links().iter().all(|l| l.from == *c || l.to == *c),
        _ => false,
    }
}

/// Winner determination instances met while running a single-intersection
/// scenario, in round order.
pub fn collect_wdp_instances(doc: &ScenarioDoc) -> Result<Vec<BidSet>> {
    let config = &doc.run;
    config.validate()?;
    let graph = load_network(doc)?;
    let junctions = build_junctions(&graph)?;
    let demand = Demand::from_scenario(&graph, &doc.demand, config)?;
    if !is_single_intersection(&graph) {
        return Err(Error::Config("instances are only collected on a single intersection".into()));
    }
    if !config.mode.is_auction() {
        return Err(Error::Config(format!("mode `{}` runs no auction", config.mode)));
    }
    micro::run_capturing(&doc.name, &graph, &junctions[0], &demand, config, true).map(|r| r.1)
}

/// Runs hand-placed vehicles, and optional bookings made before the start,
/// through the junction of a single-intersection scenario. Demand is
/// ignored. Exits are listed in order.
pub fn run_placed(
    doc: &ScenarioDoc,
    placements: &[Placement],
    bookings: &[PresetBooking],
    max_ticks: u64,
) -> Result<Vec<PlacedExit>> {
    doc.run.validate()?;
    let graph = load_network(doc)?;
    let junctions = build_junctions(&graph)?;
    if !is_single_intersection(&graph) {
        return Err(Error::Config("placed runs need a single intersection".into()));
    }
    micro::run_placed(&graph, &junctions[0], &doc.run, placements, bookings, max_ticks)
}

/// Runs a scenario to completion.
pub fn run(doc: &ScenarioDoc) -> Result<RunResults> {
    let config = &doc.run;
    config.validate()?;
    let graph = load_network(doc)?;
    let junctions = build_junctions(&graph)?;
    let demand = Demand::from_scenario(&graph, &doc.demand, config)?;
    if is_single_intersection(&graph) {
        micro::run(&doc.name, &graph, &junctions[0], &demand, config)
    } else {
        network::run(&doc.name, &graph, &junctions, &demand, config)
    }
}
