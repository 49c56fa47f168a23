//! Single-intersection runs: every approach lane is simulated with car
//! following, and vehicles cross the box on their booked schedule.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, RunConfig};
use super::demand::{sample_profile, Demand};
use super::layout::Junction;
use super::manager::Manager;
use super::metrics::{delay, normalized_delay, MovingAverage};
use super::results::{DensityRow, DistanceRow, IntersectionRow, RunResults, TraceRow, VehicleRow};
use super::stream;
use crate::auction::BidSet;
use crate::driver::{bidding_behavior, DriverProfile};
use crate::dynamics::{micro_step, Control, Crossing, IdmParams, MicroVehicle};
use crate::error::{Error, Result};
use crate::isect::{PathKey, Reply, ReservationRequest, Side};
use crate::roadnet::{LinkId, NetworkGraph, Route};

#[derive(Debug, Clone, Copy)]
struct Booking {
    t_a: f64,
    v_a: f64,
    payment: f64,
}

#[derive(Debug, Clone)]
struct Car {
    profile: DriverProfile,
    route: [LinkId; 2],
    key: PathKey,
    spawn_s: f64,
    booking: Option<Booking>,
    pending: bool,
    next_request: u64,
    crossing: Option<Crossing>,
    rejections: u32,
}

type LaneKey = (Side, u8);

/// One intersection and its approach lanes.
struct MicroSim<'g> {
    graph: &'g NetworkGraph,
    junction: &'g Junction,
    config: RunConfig,
    idm: IdmParams<f64>,
    manager: Manager,
    wdp_rng: ChaCha8Rng,
    cars: BTreeMap<u64, Car>,
    lanes: BTreeMap<LaneKey, Vec<MicroVehicle>>,
    waiting: BTreeMap<LaneKey, VecDeque<u64>>,
    revenue: f64,
    misses: u64,
}

fn idm_params(config: &RunConfig) -> IdmParams<f64> {
    IdmParams {
        accel: config.idm_accel,
        decel: config.idm_decel,
        headway: config.idm_headway_s,
        min_gap: config.idm_min_gap_m,
        exponent: config.idm_exponent,
    }
}

impl<'g> MicroSim<'g> {
    fn new(graph: &'g NetworkGraph, junction: &'g Junction, config: &RunConfig, wdp_rng: ChaCha8Rng) -> Self {
        MicroSim {
            graph,
            junction,
            config: config.clone(),
            idm: idm_params(config),
            manager: Manager::new(junction.name.clone(), junction.geometry.clone(), config),
            wdp_rng,
            cars: BTreeMap::new(),
            lanes: BTreeMap::new(),
            waiting: BTreeMap::new(),
            revenue: 0.0,
            misses: 0,
        }
    }

    /// Path through the box for a trip from `from` to `to`, with the lane
    /// picked by `spread` among those allowed.
    fn path_key(&self, from: LinkId, to: LinkId, spread: u64) -> Result<PathKey> {
        let side = self.junction.side_in(from).ok_or_else(|| self.not_here(from))?;
        let turn = self.junction.turn(from, to).ok_or_else(|| {
            Error::Schema(format!(
                "no turn from `{}` into `{}` at `{}`",
                self.graph.link(from).name,
                self.graph.link(to).name,
                self.junction.name
            ))
        })?;
        let lane = self.junction.geometry.lane_for(side, turn, spread);
        let key = PathKey { side, lane, turn };
        self.junction.geometry.path(key)?;
        Ok(key)
    }

    fn not_here(&self, link: LinkId) -> Error {
        Error::Schema(format!(
            "link `{}` does not enter `{}`",
            self.graph.link(link).name,
            self.junction.name
        ))
    }

    /// Queues a vehicle for insertion at the start of its approach.
    fn add(&mut self, id: u64, profile: DriverProfile, route: [LinkId; 2], key: PathKey, spawn_s: f64) {
        self.cars.insert(
            id,
            Car {
                profile,
                route,
                key,
                spawn_s,
                booking: None,
                pending: false,
                next_request: 0,
                crossing: None,
                rejections: 0,
            },
        );
        self.waiting.entry((key.side, key.lane)).or_default().push_back(id);
    }

    fn in_network(&self) -> usize {
        self.cars.len()
    }

    fn approach_length(&self, side: Side) -> f64 {
        self.graph.link(self.junction.incoming(side).expect("lane on a side without road")).length_m
    }

    fn vmax(&self, side: Side) -> f64 {
        self.graph.link(self.junction.incoming(side).expect("lane on a side without road")).vmax_mps
    }

    /// Advances one tick; returns the vehicles that cleared the box, with
    /// their exit times.
    fn step(&mut self, tick: u64) -> Result<Vec<(u64, f64, Car)>> {
        let dt = self.config.dt_s;
        let now = tick as f64 * dt;
        self.insert_waiting();
        for reply in self.manager.deliver(tick) {
            self.on_reply(reply, tick);
        }
        self.send_requests(tick, now)?;
        self.manager.close_round(tick, |_| 0.0, &mut self.wdp_rng)?;
        self.launch(now);
        self.set_controls(now);
        let quantum = self.junction.geometry.tile_size();
        for lane in self.lanes.values_mut() {
            micro_step(lane, &self.idm, dt, quantum);
        }
        Ok(self.clear(now + dt))
    }

    fn insert_waiting(&mut self) {
        let keys: Vec<LaneKey> = self.waiting.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| *k).collect();
        for key in keys {
            let id = *self.waiting[&key].front().unwrap();
            let vmax = self.vmax(key.0);
            let preferred = self.cars[&id].profile.preferred_speed.min(vmax);
            let lane = self.lanes.entry(key).or_default();
            let mut speed = preferred;
            if let Some(last) = lane.last() {
                let gap = last.position - last.length;
                if gap < self.idm.min_gap {
                    continue;
                }
                if gap < self.idm.min_gap + speed * self.idm.headway {
                    speed = speed.min(last.speed);
                }
            }
            self.waiting.get_mut(&key).unwrap().pop_front();
            lane.push(MicroVehicle {
                id,
                position: 0.0,
                speed,
                preferred,
                length: self.junction.geometry.vehicle_length(),
                control: Control::Free,
            });
        }
    }

    fn on_reply(&mut self, reply: Reply, tick: u64) {
        let retry = self.config.retry_ticks as u64;
        let Some(car) = self.cars.get_mut(&reply.vehicle()) else {
            return;
        };
        car.pending = false;
        match reply {
            Reply::Confirmed(c) => {
                car.booking = Some(Booking {
                    t_a: c.arrival_time,
                    v_a: c.arrival_speed,
                    payment: c.payment,
                })
            }
            Reply::Rejected(_) => {
                car.booking = None;
                car.rejections += 1;
                car.next_request = tick + retry;
            }
        }
    }

    /// Every vehicle without a booking asks, in lane order, estimating its
    /// arrival from its current speed alone.
    fn send_requests(&mut self, tick: u64, now: f64) -> Result<()> {
        let dt = self.config.dt_s;
        let reply_at = self.manager.reply_tick(tick) as f64 * dt;
        let rebid = self.config.mode.is_auction() && self.config.rebid_booked;
        let keys: Vec<LaneKey> = self.lanes.keys().copied().collect();
        for key in keys {
            let line = self.approach_length(key.0);
            for i in 0..self.lanes[&key].len() {
                let veh = &self.lanes[&key][i];
                let (id, x, v) = (veh.id, veh.position, veh.speed);
                let car = &self.cars[&id];
                if let (None, Some(b)) = (car.crossing, car.booking) {
                    // Held up by the vehicle ahead: the booking can no longer
                    // be met, so it is withdrawn and requested again.
                    if line - b.v_a * (b.t_a - now) - x > b.v_a * dt + 1e-9 {
                        self.cars.get_mut(&id).unwrap().booking = None;
                        self.manager.cancel(id);
                        self.misses += 1;
                    }
                }
                let car = &self.cars[&id];
                if car.crossing.is_some() || car.pending || tick < car.next_request {
                    continue;
                }
                let (t_a, v_a) = match car.booking {
                    Some(b) if rebid && b.t_a - reply_at > b.v_a / (2.0 * self.idm.decel) + dt => (b.t_a, b.v_a),
                    Some(_) => continue,
                    None => {
                        let v_a = v.max(self.config.min_cross_speed_mps);
                        ((now + (line - x).max(0.0) / v_a).max(reply_at + 1e-3), v_a)
                    }
                };
                let mut request = ReservationRequest {
                    vehicle: id,
                    arrival_time: t_a,
                    arrival_speed: v_a,
                    side: car.key.side,
                    lane: car.key.lane,
                    turn: car.key.turn,
                    bid: None,
                };
                if self.config.mode.is_auction() {
                    request = bidding_behavior(&car.profile, self.manager.prior_bid(id), 0.0, request);
                }
                match self.manager.submit(request, now)? {
                    Some(reply) => self.on_reply(reply, tick),
                    None => self.cars.get_mut(&id).unwrap().pending = true,
                }
            }
        }
        Ok(())
    }

    /// Bookings due this tick: the front vehicle of the lane enters the box
    /// if it is on schedule, anything else gives its booking up.
    fn launch(&mut self, now: f64) {
        let dt = self.config.dt_s;
        for (key, lane) in &self.lanes {
            let line = self.graph.link(self.junction.incoming(key.0).unwrap()).length_m;
            let mut front = true;
            for veh in lane.iter() {
                let car = self.cars.get_mut(&veh.id).unwrap();
                if car.crossing.is_some() {
                    continue;
                }
                if let Some(b) = car.booking {
                    if b.t_a < now + dt {
                        let late = line - b.v_a * (b.t_a - now) - veh.position;
                        if front && late <= b.v_a * dt + 1e-9 {
                            let distance = self.junction.geometry.crossing_distance(car.key).expect("checked path");
                            car.crossing = Some(Crossing {
                                arrival_time: b.t_a,
                                speed: b.v_a,
                                distance,
                            });
                            car.profile.spent += b.payment;
                            self.revenue += b.payment;
                        } else {
                            car.booking = None;
                            self.manager.cancel(veh.id);
                            self.misses += 1;
                        }
                    }
                }
                front = false;
            }
        }
    }

    fn set_controls(&mut self, now: f64) {
        let end = now + self.config.dt_s;
        for (key, lane) in self.lanes.iter_mut() {
            let line = self.graph.link(self.junction.incoming(key.0).unwrap()).length_m;
            for veh in lane.iter_mut() {
                let car = &self.cars[&veh.id];
                veh.control = if let Some(c) = car.crossing {
                    veh.position = line + c.speed * (end - c.arrival_time);
                    veh.speed = c.speed;
                    Control::Scripted
                } else if let Some(b) = car.booking {
                    Control::Track {
                        target: line - b.v_a * (b.t_a - end).max(0.0),
                        speed: b.v_a,
                    }
                } else {
                    Control::StopAt(line)
                };
            }
        }
    }

    fn clear(&mut self, end: f64) -> Vec<(u64, f64, Car)> {
        for (key, lane) in self.lanes.iter_mut() {
            let line = self.graph.link(self.junction.incoming(key.0).unwrap()).length_m;
            lane.retain(|v| !(self.cars[&v.id].crossing.is_some() && v.position - v.length >= line));
        }
        let done: Vec<(u64, f64)> = self
            .cars
            .iter()
            .filter_map(|(&id, c)| c.crossing.map(|x| (id, x.exit_time())))
            .filter(|&(_, t)| t <= end + 1e-9)
            .collect();
        let mut out = Vec::with_capacity(done.len());
        for (id, t) in done {
            if let Some(pos) = self.lanes.get(&(self.cars[&id].key.side, self.cars[&id].key.lane)).and_then(|l| l.iter().position(|v| v.id == id)) {
                self.lanes.get_mut(&(self.cars[&id].key.side, self.cars[&id].key.lane)).unwrap().remove(pos);
            }
            self.manager.release(id);
            out.push((id, t, self.cars.remove(&id).unwrap()));
        }
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn sample(&self, time_s: f64, densities: &mut Vec<DensityRow>, distances: &mut Vec<DistanceRow>) {
        let (mut total, mut lane_km) = (0usize, 0.0);
        for side in Side::ALL {
            let Some(link) = self.junction.incoming(side) else { continue };
            let l = self.graph.link(link);
            let n: usize = self
                .lanes
                .iter()
                .filter(|(k, _)| k.0 == side)
                .map(|(_, lane)| lane.iter().filter(|v| self.cars[&v.id].crossing.is_none()).count())
                .sum();
            let km = l.length_m / 1000.0 * l.lanes as f64;
            densities.push(DensityRow {
                time_s,
                kind: "link".into(),
                element: l.name.clone(),
                density: n as f64 / km,
            });
            total += n;
            lane_km += km;
            for lane in 0..self.junction.geometry.lanes_in(side) {
                distances.push(DistanceRow {
                    time_s,
                    intersection: self.junction.name.clone(),
                    side: format!("{side:?}").to_lowercase(),
                    lane,
                    d_i_m: self.manager.distance_limit(side, lane).min(l.length_m),
                });
            }
        }
        densities.push(DensityRow {
            time_s,
            kind: "intersection".into(),
            element: self.junction.name.clone(),
            density: if lane_km > 0.0 { total as f64 / lane_km } else { 0.0 },
        });
    }
}

/// Time a vehicle needs for its trip with the intersection to itself.
fn ghost_time(
    graph: &NetworkGraph,
    junction: &Junction,
    config: &RunConfig,
    profile: &DriverProfile,
    route: [LinkId; 2],
    key: PathKey,
) -> Result<f64> {
    let ghost_config = RunConfig {
        mode: Mode::Fcfs,
        ..config.clone()
    };
    let mut sim = MicroSim::new(graph, junction, &ghost_config, stream(config.seed, 0));
    sim.add(0, profile.clone(), route, key, 0.0);
    let cap = ((config.drain_cap_s.max(3600.0)) / config.dt_s) as u64;
    for tick in 0..cap {
        if let Some((_, t, _)) = sim.step(tick)?.into_iter().next() {
            return Ok(t);
        }
    }
    Err(Error::Config(format!(
        "a lone vehicle did not cross `{}` within {} s",
        junction.name, config.drain_cap_s
    )))
}

/// A vehicle put straight onto its approach lane at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub id: u64,
    /// Incoming link name.
    pub from: String,
    /// Outgoing link name.
    pub to: String,
    /// Distance travelled from the start of the approach, m.
    pub position_m: f64,
    pub speed_mps: f64,
}

/// A booking granted before the first tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetBooking {
    pub vehicle: u64,
    pub arrival_time: f64,
    pub arrival_speed: f64,
}

/// How a placed vehicle left the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedExit {
    pub vehicle: u64,
    pub time_s: f64,
    pub rejections: u32,
}

impl<'g> MicroSim<'g> {
    fn place(&mut self, p: &Placement) -> Result<()> {
        let link = |name: &str| {
            self.graph
                .link_id(name)
                .ok_or_else(|| Error::Schema(format!("unknown link `{name}`")))
        };
        let (from, to) = (link(&p.from)?, link(&p.to)?);
        let profile = DriverProfile {
            origin: self.graph.link(from).from,
            destination: self.graph.link(to).to,
            preferred_speed: p.speed_mps,
            w_time: 0.5,
            valuation: 100.0,
            spent: 0.0,
            tracked: false,
        };
        let key = self.path_key(from, to, 0)?;
        self.add(p.id, profile, [from, to], key, 0.0);
        self.waiting.get_mut(&(key.side, key.lane)).unwrap().retain(|&v| v != p.id);
        let lane = self.lanes.entry((key.side, key.lane)).or_default();
        lane.push(MicroVehicle {
            id: p.id,
            position: p.position_m,
            speed: p.speed_mps,
            preferred: p.speed_mps,
            length: self.junction.geometry.vehicle_length(),
            control: Control::Free,
        });
        lane.sort_by(|a, b| b.position.total_cmp(&a.position));
        Ok(())
    }
}

/// Runs hand-placed vehicles through the junction with no other traffic,
/// until all of them have left or `max_ticks` pass.
pub(super) fn run_placed(
    graph: &NetworkGraph,
    junction: &Junction,
    config: &RunConfig,
    placements: &[Placement],
    bookings: &[PresetBooking],
    max_ticks: u64,
) -> Result<Vec<PlacedExit>> {
    let mut sim = MicroSim::new(graph, junction, config, stream(config.seed, 100));
    for p in placements {
        sim.place(p)?;
    }
    for b in bookings {
        let key = sim.cars.get(&b.vehicle).ok_or(Error::UnknownVehicle(b.vehicle))?.key;
        let request = ReservationRequest {
            vehicle: b.vehicle,
            arrival_time: b.arrival_time,
            arrival_speed: b.arrival_speed,
            side: key.side,
            lane: key.lane,
            turn: key.turn,
            bid: None,
        };
        if let Some(reply) = sim.manager.submit(request, 0.0)? {
            sim.on_reply(reply, 0);
        }
    }
    let mut exits = Vec::new();
    for tick in 0..max_ticks {
        exits.extend(sim.step(tick)?.into_iter().map(|(vehicle, time_s, car)| PlacedExit {
            vehicle,
            time_s,
            rejections: car.rejections,
        }));
        if sim.cars.is_empty() {
            break;
        }
    }
    Ok(exits)
}

pub(super) fn run(
    name: &str,
    graph: &NetworkGraph,
    junction: &Junction,
    demand: &Demand,
    config: &RunConfig,
) -> Result<RunResults> {
    run_capturing(name, graph, junction, demand, config, false).map(|r| r.0)
}

/// Runs the scenario and, with `capture`, also returns every winner
/// determination instance of the auction.
pub(super) fn run_capturing(
    name: &str,
    graph: &NetworkGraph,
    junction: &Junction,
    demand: &Demand,
    config: &RunConfig,
    capture: bool,
) -> Result<(RunResults, Vec<BidSet>)> {
    let dt = config.dt_s;
    let mut spawn_rng = stream(config.seed, 1);
    let mut profile_rng = stream(config.seed, 2);
    let mut lane_rng = stream(config.seed, 5);
    let mut sim = MicroSim::new(graph, junction, config, stream(config.seed, 100));
    if capture {
        sim.manager.capture_rounds();
    }
    let mut results = RunResults {
        scenario: name.to_string(),
        mode: config.mode,
        seed: config.seed,
        ..Default::default()
    };
    let mut average = MovingAverage::default();
    let mut ghosts: HashMap<(LinkId, LinkId, u8, u64), f64> = HashMap::new();
    let mut next_id = 1u64;
    let density_every = ((config.density_period_s / dt).round() as u64).max(1);
    let window_ticks = (config.spawn_window_s / dt).ceil() as u64;
    let horizon = ((config.spawn_window_s + config.drain_cap_s) / dt).ceil() as u64;

    let mut tick = 0u64;
    loop {
        let now = tick as f64 * dt;
        if tick < window_ticks {
            for od in demand.draw(&mut spawn_rng, dt) {
                let profile = sample_profile(&mut profile_rng, od, config);
                let from = graph.link_between(od.0, junction.node).ok_or_else(|| unreachable(graph, od))?;
                let to = graph.link_between(junction.node, od.1).ok_or_else(|| unreachable(graph, od))?;
                let key = sim.path_key(from, to, lane_rng.random())?;
                sim.add(next_id, profile, [from, to], key, now);
                next_id += 1;
                results.spawned += 1;
            }
        } else if sim.in_network() == 0 || tick >= horizon {
            break;
        }
        if tick % density_every == 0 {
            sim.sample(now, &mut results.densities, &mut results.distances);
        }
        for (id, exit, car) in sim.step(tick)? {
            let travel = exit - car.spawn_s;
            let ghost_key = (car.route[0], car.route[1], car.key.lane, car.profile.preferred_speed.to_bits());
            let unhindered = match ghosts.get(&ghost_key) {
                Some(&t) => t,
                None => {
                    let t = ghost_time(graph, junction, config, &car.profile, car.route, car.key)?;
                    ghosts.insert(ghost_key, t);
                    t
                }
            };
            let mean = average.push(travel);
            results.trace.push(TraceRow {
                time_s: exit,
                vehicle: id,
                travel_s: travel,
                mean_s: mean,
            });
            results.vehicles.push(row(graph, id, &car, Some(exit), Some((travel, unhindered))));
        }
        debug_assert_eq!(results.spawned, results.vehicles.len() as u64 + sim.in_network() as u64);
        tick += 1;
    }
    results.ticks = tick;
    results.partial = sim.in_network() > 0;
    let left: Vec<(u64, Car)> = std::mem::take(&mut sim.cars).into_iter().collect();
    for (id, car) in left {
        results.vehicles.push(row(graph, id, &car, None, None));
    }
    results.vehicles.sort_by_key(|v| v.id);
    results.intersections.push(IntersectionRow {
        intersection: junction.name.clone(),
        requests: sim.manager.requests,
        rejections: sim.manager.rejections,
        revenue: sim.revenue,
    });
    results.auctions = std::mem::take(&mut sim.manager.log);
    if sim.misses > 0 {
        log::debug!("{} bookings given up at `{}`", sim.misses, junction.name);
    }
    Ok((results, std::mem::take(&mut sim.manager.captured)))
}

fn unreachable(graph: &NetworkGraph, od: (crate::roadnet::NodeId, crate::roadnet::NodeId)) -> Error {
    Error::EmptyChoiceSet {
        origin: graph.node(od.0).name.clone(),
        destination: graph.node(od.1).name.clone(),
    }
}

fn row(graph: &NetworkGraph, id: u64, car: &Car, exit: Option<f64>, times: Option<(f64, f64)>) -> VehicleRow {
    let route = Route::new(graph, car.route.to_vec());
    let travel = times.map(|t| t.0);
    let unhindered = times.map(|t| t.1);
    VehicleRow {
        id,
        origin: graph.node(car.profile.origin).name.clone(),
        destination: graph.node(car.profile.destination).name.clone(),
        spawn_s: car.spawn_s,
        completion_s: exit,
        completed: exit.is_some(),
        route: route.label(graph),
        bid: car.profile.valuation,
        tracked: car.profile.tracked,
        spent: car.profile.spent,
        travel_s: travel,
        unhindered_s: unhindered,
        delay_s: times.map(|(t, u)| delay(t, u)),
        // One route per trip here, so the shortest route is the one taken.
        shortest_s: unhindered,
        normalized_delay: times.map(|(t, u)| normalized_delay(t, u)),
        rejections: car.rejections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::build_junctions;
    use crate::roadnet::load_network;
    use crate::scenario::{DemandDoc, ScenarioDoc};

    fn four_way(lanes: u32) -> ScenarioDoc {
        let mut doc =
            ScenarioDoc::from_toml_str(include_str!("../../../../scenarios/single_intersection.toml")).unwrap();
        for l in &mut doc.links {
            l.lanes = lanes;
        }
        doc.run.spawn_window_s = 300.0;
        doc.run.wdp_passes = 50;
        doc
    }

    #[test]
    fn empty_demand_gives_empty_results() {
        let mut doc = four_way(3);
        doc.demand = vec![DemandDoc {
            origin: "S".into(),
            destination: "N".into(),
            count: None,
            rate_per_min: Some(0.0),
        }];
        let r = crate::engine::run(&doc).unwrap();
        assert_eq!(r.spawned, 0);
        assert!(r.vehicles.is_empty() && r.trace.is_empty());
        assert!(!r.partial);
        assert_eq!(r.intersections[0].requests, 0);
    }

    #[test]
    fn lone_vehicle_is_not_delayed() {
        let doc = four_way(3);
        let graph = load_network(&doc).unwrap();
        let junctions = build_junctions(&graph).unwrap();
        let demand = Demand {
            fixed: vec![((graph.node_id("W").unwrap(), graph.node_id("E").unwrap()), 1.0)],
            ..Default::default()
        };
        let config = RunConfig {
            spawn_window_s: 5.0,
            ..doc.run.clone()
        };
        // Keep drawing seeds until exactly one vehicle shows up.
        let r = (0..200)
            .map(|seed| run("t", &graph, &junctions[0], &demand, &RunConfig { seed, ..config.clone() }).unwrap())
            .find(|r| r.spawned == 1)
            .unwrap();
        let v = &r.vehicles[0];
        assert!(v.completed);
        assert!(v.delay_s.unwrap() < 1e-9, "{v:?}");
        // 250 m approach at no more than the speed limit.
        assert!(v.travel_s.unwrap() > 250.0 / 13.89);
    }

    #[test]
    fn trailing_booking_does_not_deadlock() {
        // A is ahead of B in the same lane, B holds a booking for the slot A
        // needs, and A cannot get out of B's way.
        let doc = four_way(1);
        let graph = load_network(&doc).unwrap();
        let junctions = build_junctions(&graph).unwrap();
        let config = RunConfig { mode: Mode::Fcfs, ..doc.run.clone() };
        let at = |id, position_m| Placement {
            id,
            from: "S-C".into(),
            to: "C-N".into(),
            position_m,
            speed_mps: 10.0,
        };
        let early = PresetBooking {
            vehicle: 2,
            arrival_time: 10.0,
            arrival_speed: 10.0,
        };
        let exits = run_placed(&graph, &junctions[0], &config, &[at(1, 150.0), at(2, 120.0)], &[early], 600).unwrap();
        assert_eq!(exits.len(), 2, "both vehicles must cross");
        assert_eq!((exits[0].vehicle, exits[1].vehicle), (1, 2));
        assert!(exits[0].rejections >= 1, "A is turned down while B holds the slot");
        assert!(exits[1].rejections >= 1, "B is filtered behind A");
    }

    fn busy(mode: Mode, seed: u64) -> ScenarioDoc {
        let mut doc = four_way(3);
        doc.run.mode = mode;
        doc.run.seed = seed;
        doc.run.lambda_per_min = 20.0;
        doc.run.tracked_fraction = 0.2;
        doc.run.tracked_endowments = vec![10.0, 1000.0];
        doc
    }

    #[test]
    fn reruns_write_identical_files() {
        for mode in [Mode::Fcfs, Mode::Ca] {
            let doc = busy(mode, 7);
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            let first = crate::engine::run(&doc).unwrap();
            first.write_dir(a.path(), &doc.run).unwrap();
            let second = crate::engine::run(&doc).unwrap();
            second.write_dir(b.path(), &doc.run).unwrap();
            assert_eq!(first, second);
            for f in std::fs::read_dir(a.path()).unwrap() {
                let name = f.unwrap().file_name();
                let x = std::fs::read(a.path().join(&name)).unwrap();
                let y = std::fs::read(b.path().join(&name)).unwrap();
                assert!(x == y, "{name:?} differs");
            }
        }
    }

    #[test]
    fn vehicles_and_money_are_conserved() {
        for (mode, seed) in [(Mode::Fcfs, 3), (Mode::Ca, 3), (Mode::Ca, 4)] {
            let r = crate::engine::run(&busy(mode, seed)).unwrap();
            assert_eq!(r.vehicles.len() as u64, r.spawned);
            assert!(!r.partial);
            assert!((r.spending() - r.revenue()).abs() < 1e-6);
            if mode == Mode::Ca {
                assert!(r.revenue() > 0.0);
            } else {
                assert_eq!(r.revenue(), 0.0);
            }
            assert!(r.vehicles.iter().all(|v| v.spent <= v.bid + 1e-9 || v.tracked));
            let last = r.trace.last().unwrap().mean_s;
            let mean = r.completed().map(|v| v.travel_s.unwrap()).sum::<f64>() / r.spawned as f64;
            assert!((last - mean).abs() < 1e-9);
        }
    }
}
