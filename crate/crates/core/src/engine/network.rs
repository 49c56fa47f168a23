//! Network runs: links move vehicles by density, intersections grant
//! crossings through reservations, and under the priced modes drivers pick
//! and revise routes against the posted prices.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::config::{Mode, RunConfig};
use super::demand::{sample_profile, Demand};
use super::layout::Junction;
use super::manager::Manager;
use super::metrics::{delay, normalized_delay, MovingAverage};
use super::results::{DensityRow, DistanceRow, IntersectionRow, RunResults, TraceRow, VehicleRow};
use super::stream;
use crate::driver::{bidding_behavior, choose_route_ca_cta, reevaluate_route, DriverProfile, RouteCache};
use crate::dynamics::{
    meso_step, meso_target_speed, reference_speed, stop_line_speed, Crossing, LinkCounts, MesoStep, MesoVehicle,
};
use crate::error::Result;
use crate::isect::{PathKey, Reply, ReservationRequest, Side};
use crate::market::{FundamentalDiagram, Market, PriceRule, PriceVector};
use crate::roadnet::{LinkId, NetworkGraph, NodeId, Route};

#[derive(Debug, Clone, Copy)]
struct Booking {
    t_a: f64,
    v_a: f64,
    payment: f64,
}

#[derive(Debug, Clone, Copy)]
struct InBox {
    junction: usize,
    crossing: Crossing,
}

#[derive(Debug, Clone)]
struct Trip {
    profile: DriverProfile,
    /// Planned links; `route[idx]` is the current one.
    route: Vec<LinkId>,
    idx: usize,
    motion: MesoVehicle,
    spawn_s: f64,
    /// Links actually driven so far, in order.
    taken: Vec<LinkId>,
    key: Option<PathKey>,
    booking: Option<Booking>,
    pending: bool,
    next_request: u64,
    in_box: Option<InBox>,
    rejections: u32,
}

impl Trip {
    fn link(&self) -> LinkId {
        self.route[self.idx]
    }

    fn next_link(&self) -> Option<LinkId> {
        self.route.get(self.idx + 1).copied()
    }
}

/// Finished trip handed back by [`NetSim::step`].
struct Arrival {
    id: u64,
    time: f64,
    trip: Trip,
}

struct NetSim<'g> {
    graph: &'g NetworkGraph,
    junctions: &'g [Junction],
    at_node: HashMap<NodeId, usize>,
    config: RunConfig,
    managers: Vec<Manager>,
    wdp_rngs: Vec<ChaCha8Rng>,
    market: Option<Market>,
    prices: PriceVector,
    price_log: Vec<crate::market::PriceLogRow>,
    counts: LinkCounts,
    routes: RouteCache,
    trips: BTreeMap<u64, Trip>,
    /// Spawned vehicles waiting for room on their first link.
    queued: BTreeMap<LinkId, VecDeque<u64>>,
    revenue: Vec<f64>,
    misses: u64,
    /// Re-plan at every link entry.
    replan: bool,
}

impl<'g> NetSim<'g> {
    fn new(graph: &'g NetworkGraph, junctions: &'g [Junction], config: &RunConfig, replan: bool) -> Self {
        let market = config.mode.is_priced().then(|| {
            let diagram = FundamentalDiagram::new(config.mu_jam_per_km, 1.0);
            Market::new(
                graph,
                diagram.mu_opt(),
                config.supply_share,
                PriceRule {
                    floor: config.price_floor,
                    epsilon: config.price_epsilon,
                },
            )
        });
        let n = graph.links().len();
        let prices = market.as_ref().map_or_else(|| PriceVector::zeros(n), |m| m.snapshot(n));
        NetSim {
            graph,
            junctions,
            at_node: junctions.iter().enumerate().map(|(i, j)| (j.node, i)).collect(),
            config: config.clone(),
            managers: junctions
                .iter()
                .map(|j| Manager::new(j.name.clone(), j.geometry.clone(), config))
                .collect(),
            wdp_rngs: (0..junctions.len() as u64).map(|i| stream(config.seed, 100 + i)).collect(),
            market,
            prices,
            price_log: Vec::new(),
            counts: LinkCounts::new(n),
            routes: RouteCache::new(config.k_routes),
            trips: BTreeMap::new(),
            queued: BTreeMap::new(),
            revenue: vec![0.0; junctions.len()],
            misses: 0,
            replan,
        }
    }

    fn jam_count(&self, link: LinkId) -> u32 {
        let l = self.graph.link(link);
        (self.config.mu_jam_per_km * l.length_m / 1000.0 * l.lanes as f64).floor() as u32
    }

    fn in_network(&self) -> usize {
        self.trips.len()
    }

    /// Route from `origin` under the current mode and prices.
    fn plan(&mut self, from: NodeId, avoid: &[NodeId], profile: &DriverProfile) -> Result<Route> {
        let routes = self.routes.routes(self.graph, from, profile.destination, avoid)?;
        match self.config.mode {
            Mode::Cta => reevaluate_route(
                self.graph,
                from,
                profile.destination,
                avoid,
                &self.prices,
                profile,
                &mut self.routes,
            ),
            Mode::CaCta => {
                let i = choose_route_ca_cta(self.graph, &routes, &self.prices, profile)?;
                Ok(routes[i].clone())
            }
            Mode::Fcfs | Mode::Ca => Ok(routes[0].clone()),
        }
    }

    fn add(&mut self, id: u64, profile: DriverProfile, route: Vec<LinkId>, spawn_s: f64) {
        let first = route[0];
        let motion = MesoVehicle {
            link: first,
            x: 0.0,
            v: 0.0,
            accel: self.config.meso_accel,
            decel: self.config.meso_decel,
        };
        self.trips.insert(
            id,
            Trip {
                profile,
                route,
                idx: 0,
                motion,
                spawn_s,
                taken: Vec::new(),
                key: None,
                booking: None,
                pending: false,
                next_request: 0,
                in_box: None,
                rejections: 0,
            },
        );
        self.queued.entry(first).or_default().push_back(id);
    }

    /// Puts queued vehicles on their first link while it has room.
    fn insert_queued(&mut self) -> Result<()> {
        let links: Vec<LinkId> = self.queued.keys().copied().collect();
        for link in links {
            while self.counts.count(link) < self.jam_count(link).max(1) {
                let Some(id) = self.queued.get_mut(&link).unwrap().pop_front() else { break };
                self.counts.enter(link);
                let dest = self.trips[&id].profile.destination;
                let trip = self.trips.get_mut(&id).unwrap();
                trip.taken.push(link);
                let y = reference_speed(
                    trip.profile.preferred_speed,
                    self.counts.density(self.graph, link),
                    self.config.mu_jam_per_km,
                    self.graph.link(link).vmax_mps,
                );
                trip.motion.v = y.max(self.config.creep_speed_mps);
                if self.replan && self.graph.link(link).to != dest {
                    self.replan_from(id)?;
                }
            }
        }
        Ok(())
    }

    /// Re-plans the rest of the trip after the current link, never going
    /// back through a node already driven through.
    fn replan_from(&mut self, id: u64) -> Result<()> {
        let trip = &self.trips[&id];
        let here = self.graph.link(trip.link()).to;
        let profile = trip.profile.clone();
        let avoid: Vec<NodeId> = trip.taken.iter().map(|&l| self.graph.link(l).from).collect();
        // Keep the current plan when nothing else leads on from here.
        if let Ok(route) = self.plan(here, &avoid, &profile) {
            let trip = self.trips.get_mut(&id).unwrap();
            trip.route.truncate(trip.idx + 1);
            trip.route.extend(route.links);
            trip.key = None;
        }
        Ok(())
    }

    fn step(&mut self, tick: u64) -> Result<Vec<Arrival>> {
        let dt = self.config.dt_s;
        let now = tick as f64 * dt;
        if let Some(market) = &mut self.market {
            let every = ((self.config.price_period_s / dt).round() as u64).max(1);
            if tick % every == 0 {
                let counts = &self.counts;
                market.update(|l| counts.count(l) as u64);
                self.prices = market.snapshot(self.graph.links().len());
                self.price_log.extend(market.log_rows(self.graph, now));
            }
        }
        self.insert_queued()?;
        for j in 0..self.managers.len() {
            for reply in self.managers[j].deliver(tick) {
                self.on_reply(reply, tick);
            }
        }
        self.send_requests(tick, now)?;
        for j in 0..self.managers.len() {
            let junction = &self.junctions[j];
            let prices = &self.prices;
            let priced = self.config.mode == Mode::CaCta;
            let reserve = |r: &ReservationRequest| match (priced, junction.incoming(r.side)) {
                (true, Some(l)) => prices.get(l),
                _ => 0.0,
            };
            self.managers[j].close_round(tick, reserve, &mut self.wdp_rngs[j])?;
        }
        self.launch(now);
        self.move_boxes(now)?;
        let mut out = self.move_links(now)?;
        out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.id.cmp(&b.id)));
        Ok(out)
    }

    fn junction_ahead(&self, trip: &Trip) -> Option<usize> {
        trip.next_link()?;
        self.at_node.get(&self.graph.link(trip.link()).to).copied()
    }

    /// Under CTA the posted price of the approach at confirmation time is
    /// what the booking costs.
    fn on_reply(&mut self, reply: Reply, tick: u64) {
        let retry = self.config.retry_ticks as u64;
        let Some(trip) = self.trips.get(&reply.vehicle()) else { return };
        let posted = if self.config.mode == Mode::Cta { self.prices.get(trip.link()) } else { 0.0 };
        let trip = self.trips.get_mut(&reply.vehicle()).unwrap();
        trip.pending = false;
        match reply {
            Reply::Confirmed(c) => {
                trip.booking = Some(Booking {
                    t_a: c.arrival_time,
                    v_a: c.arrival_speed,
                    payment: c.payment + posted,
                })
            }
            Reply::Rejected(_) => {
                trip.booking = None;
                trip.rejections += 1;
                trip.next_request = tick + retry;
            }
        }
    }

    fn send_requests(&mut self, tick: u64, now: f64) -> Result<()> {
        let dt = self.config.dt_s;
        let rebid = self.config.mode.is_auction() && self.config.rebid_booked;
        let ids: Vec<u64> = self.trips.keys().copied().collect();
        for id in ids {
            let trip = &self.trips[&id];
            if trip.in_box.is_some() || trip.taken.is_empty() {
                continue;
            }
            let Some(j) = self.junction_ahead(trip) else { continue };
            let link = self.graph.link(trip.link());
            let line = link.length_m;
            let (x, v) = (trip.motion.x, trip.motion.v);
            if let Some(b) = trip.booking {
                if line - b.v_a * (b.t_a - now) - x > b.v_a * dt + 1e-9 {
                    self.trips.get_mut(&id).unwrap().booking = None;
                    self.managers[j].cancel(id);
                    self.misses += 1;
                }
            }
            let trip = &self.trips[&id];
            if trip.pending || tick < trip.next_request || line - x > self.config.request_horizon_m {
                continue;
            }
            let next = trip.next_link().unwrap();
            let key = match trip.key {
                Some(k) => k,
                None => {
                    let junction = &self.junctions[j];
                    let side = junction.side_in(trip.link()).expect("link enters its head node");
                    let turn = junction.turn(trip.link(), next).expect("routes make no U-turns");
                    let key = PathKey {
                        side,
                        lane: junction.geometry.lane_for(side, turn, id),
                        turn,
                    };
                    self.trips.get_mut(&id).unwrap().key = Some(key);
                    key
                }
            };
            let trip = &self.trips[&id];
            let reply_at = self.managers[j].reply_tick(tick) as f64 * dt;
            let (t_a, v_a) = match trip.booking {
                Some(b) if rebid && b.t_a - reply_at > b.v_a / (2.0 * trip.motion.decel) + dt => (b.t_a, b.v_a),
                Some(_) => continue,
                None => {
                    // No point booking a crossing into a jammed road.
                    if self.counts.count(next) >= self.jam_count(next) {
                        continue;
                    }
                    let v_a = v.max(self.config.meso_cross_speed_mps);
                    ((now + (line - x).max(0.0) / v_a).max(reply_at + 1e-3), v_a)
                }
            };
            let mut request = ReservationRequest {
                vehicle: id,
                arrival_time: t_a,
                arrival_speed: v_a,
                side: key.side,
                lane: key.lane,
                turn: key.turn,
                bid: None,
            };
            if self.config.mode.is_auction() {
                let reserve = if self.config.mode == Mode::CaCta { self.prices.get(trip.link()) } else { 0.0 };
                request = bidding_behavior(&trip.profile, self.managers[j].prior_bid(id), reserve, request);
            }
            match self.managers[j].submit(request, now)? {
                Some(reply) => self.on_reply(reply, tick),
                None => self.trips.get_mut(&id).unwrap().pending = true,
            }
        }
        Ok(())
    }

    fn launch(&mut self, now: f64) {
        let dt = self.config.dt_s;
        let ids: Vec<u64> = self
            .trips
            .iter()
            .filter(|(_, t)| t.in_box.is_none() && t.booking.is_some_and(|b| b.t_a < now + dt))
            .map(|(&id, _)| id)
            .collect();
        for id in ids {
            let trip = &self.trips[&id];
            let j = self.junction_ahead(trip).expect("booked vehicles face a junction");
            let b = trip.booking.unwrap();
            let line = self.graph.link(trip.link()).length_m;
            let late = line - b.v_a * (b.t_a - now) - trip.motion.x;
            if late <= b.v_a * dt + 1e-9 {
                let distance = self.junctions[j]
                    .geometry
                    .crossing_distance(trip.key.expect("booked with a path"))
                    .expect("checked path");
                let link = trip.link();
                let trip = self.trips.get_mut(&id).unwrap();
                trip.in_box = Some(InBox {
                    junction: j,
                    crossing: Crossing {
                        arrival_time: b.t_a,
                        speed: b.v_a,
                        distance,
                    },
                });
                trip.profile.spent += b.payment;
                self.revenue[j] += b.payment;
                self.counts.leave(link);
            } else {
                self.trips.get_mut(&id).unwrap().booking = None;
                self.managers[j].cancel(id);
                self.misses += 1;
            }
        }
    }

    fn reference(&self, trip: &Trip, link: LinkId) -> f64 {
        reference_speed(
            trip.profile.preferred_speed,
            self.counts.density(self.graph, link),
            self.config.mu_jam_per_km,
            self.graph.link(link).vmax_mps,
        )
    }

    fn move_links(&mut self, now: f64) -> Result<Vec<Arrival>> {
        let dt = self.config.dt_s;
        let end = now + dt;
        let mut done = Vec::new();
        let mut handoffs = Vec::new();
        let ids: Vec<u64> = self
            .trips
            .iter()
            .filter(|(_, t)| t.in_box.is_none() && !t.taken.is_empty())
            .map(|(&id, _)| id)
            .collect();
        for id in ids {
            let trip = &self.trips[&id];
            let link = trip.link();
            let length = self.graph.link(link).length_m;
            let y_cur = self.reference(trip, link);
            let y_next = trip.next_link().map_or(y_cur, |n| self.reference(trip, n));
            let mut target = meso_target_speed(trip.motion.x, length, y_cur, y_next).max(self.config.creep_speed_mps);
            let gated = self.junction_ahead(trip).is_some();
            let schedule = trip.booking.map(|b| (length - b.v_a * (b.t_a - end).max(0.0), b.v_a));
            if gated && schedule.is_none() {
                let m = &trip.motion;
                target = target.min(stop_line_speed(m.x, m.v, length, m.decel, dt));
            }
            let trip = self.trips.get_mut(&id).unwrap();
            let before = trip.motion.x;
            let step = meso_step(&mut trip.motion, target, length, dt);
            match (gated, schedule) {
                (true, Some((at, v_a))) => {
                    if trip.motion.x > at {
                        trip.motion.x = at.max(before);
                        trip.motion.v = trip.motion.v.min(v_a);
                    }
                }
                (true, None) => {
                    if let MesoStep::Overflow(_) = step {
                        trip.motion.v = 0.0;
                    }
                }
                (false, _) => {
                    if let MesoStep::Overflow(rem) = step {
                        let v = trip.motion.v.max(1e-9);
                        let at = (end - rem / v).max(now);
                        match trip.next_link() {
                            Some(next) => handoffs.push((id, next, rem)),
                            None => done.push((id, at)),
                        }
                    }
                }
            }
        }
        for (id, next, rem) in handoffs {
            let trip = self.trips.get_mut(&id).unwrap();
            self.counts.handoff(&mut trip.motion, next, rem.min(self.graph.link(next).length_m));
            self.enter_next(id)?;
        }
        let mut out = Vec::with_capacity(done.len());
        for (id, time) in done {
            let trip = self.trips.remove(&id).unwrap();
            self.counts.leave(trip.link());
            out.push(Arrival { id, time, trip });
        }
        Ok(out)
    }

    /// Bookkeeping once a vehicle is on the next link of its route.
    fn enter_next(&mut self, id: u64) -> Result<()> {
        let trip = self.trips.get_mut(&id).unwrap();
        trip.idx += 1;
        let link = trip.route[trip.idx];
        trip.taken.push(link);
        trip.key = None;
        trip.booking = None;
        trip.pending = false;
        trip.next_request = 0;
        trip.motion.link = link;
        if self.replan && self.graph.link(link).to != trip.profile.destination {
            self.replan_from(id)?;
        }
        Ok(())
    }

    fn move_boxes(&mut self, now: f64) -> Result<()> {
        let end = now + self.config.dt_s;
        let leaving: Vec<(u64, InBox)> = self
            .trips
            .iter()
            .filter_map(|(&id, t)| t.in_box.map(|b| (id, b)))
            .filter(|(_, b)| b.crossing.exit_time() <= end + 1e-9)
            .collect();
        for (id, b) in leaving {
            self.managers[b.junction].release(id);
            let trip = self.trips.get_mut(&id).unwrap();
            trip.in_box = None;
            let next = trip.next_link().expect("a crossing leads somewhere");
            let beyond = b.crossing.speed * (end - b.crossing.exit_time());
            trip.motion.v = b.crossing.speed;
            trip.motion.x = 0.0;
            self.counts.enter(next);
            let trip = self.trips.get_mut(&id).unwrap();
            trip.motion.link = next;
            trip.motion.x = beyond.min(self.graph.link(next).length_m);
            self.enter_next(id)?;
        }
        Ok(())
    }

    fn sample(&self, time_s: f64, densities: &mut Vec<DensityRow>, distances: &mut Vec<DistanceRow>) {
        for link in self.graph.links() {
            densities.push(DensityRow {
                time_s,
                kind: "link".into(),
                element: link.name.clone(),
                density: self.counts.density(self.graph, link.id),
            });
        }
        for (j, junction) in self.junctions.iter().enumerate() {
            // The busiest approach stands for the intersection.
            let density = self
                .graph
                .in_links(junction.node)
                .iter()
                .map(|&l| self.counts.density(self.graph, l))
                .fold(0.0, f64::max);
            densities.push(DensityRow {
                time_s,
                kind: "intersection".into(),
                element: junction.name.clone(),
                density,
            });
            for side in Side::ALL {
                let Some(l) = junction.incoming(side) else { continue };
                for lane in 0..junction.geometry.lanes_in(side) {
                    distances.push(DistanceRow {
                        time_s,
                        intersection: junction.name.clone(),
                        side: format!("{side:?}").to_lowercase(),
                        lane,
                        d_i_m: self.managers[j].distance_limit(side, lane).min(self.graph.link(l).length_m),
                    });
                }
            }
        }
    }
}

/// Unhindered time of a fixed route driven alone.
fn ghost_time(
    graph: &NetworkGraph,
    junctions: &[Junction],
    config: &RunConfig,
    profile: &DriverProfile,
    route: &[LinkId],
) -> Result<f64> {
    let ghost_config = RunConfig {
        mode: Mode::Fcfs,
        ..config.clone()
    };
    let mut sim = NetSim::new(graph, junctions, &ghost_config, false);
    sim.add(0, profile.clone(), route.to_vec(), 0.0);
    let cap = (config.drain_cap_s.max(3600.0) / config.dt_s) as u64;
    for tick in 0..cap {
        if let Some(a) = sim.step(tick)?.into_iter().next() {
            return Ok(a.time);
        }
    }
    Err(crate::error::Error::Config(format!(
        "a lone vehicle did not finish `{}` within {} s",
        Route::new(graph, route.to_vec()).label(graph),
        config.drain_cap_s
    )))
}

type GhostKey = (Vec<LinkId>, u64);

pub(super) fn run(
    name: &str,
    graph: &NetworkGraph,
    junctions: &[Junction],
    demand: &Demand,
    config: &RunConfig,
) -> Result<RunResults> {
    let dt = config.dt_s;
    let mut spawn_rng = stream(config.seed, 1);
    let mut profile_rng = stream(config.seed, 2);
    let replan = config.mode.is_priced();
    let mut sim = NetSim::new(graph, junctions, config, replan);
    let mut results = RunResults {
        scenario: name.to_string(),
        mode: config.mode,
        seed: config.seed,
        ..Default::default()
    };
    let mut average = MovingAverage::default();
    let mut ghosts: HashMap<GhostKey, f64> = HashMap::new();
    let mut shortest: HashMap<(NodeId, NodeId), Vec<LinkId>> = HashMap::new();
    let mut ghost = |profile: &DriverProfile, route: &[LinkId]| -> Result<f64> {
        let key = (route.to_vec(), profile.preferred_speed.to_bits());
        if let Some(&t) = ghosts.get(&key) {
            return Ok(t);
        }
        let t = ghost_time(graph, junctions, config, profile, route)?;
        ghosts.insert(key, t);
        Ok(t)
    };
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
                let route = sim.plan(od.0, &[], &profile)?;
                sim.add(next_id, profile, route.links, now);
                next_id += 1;
                results.spawned += 1;
            }
        } else if sim.in_network() == 0 || tick >= horizon {
            break;
        }
        if tick % density_every == 0 {
            sim.sample(now, &mut results.densities, &mut results.distances);
        }
        for a in sim.step(tick)? {
            let travel = a.time - a.trip.spawn_s;
            let unhindered = ghost(&a.trip.profile, &a.trip.taken)?;
            let od = (a.trip.profile.origin, a.trip.profile.destination);
            let best = match shortest.get(&od) {
                Some(r) => r.clone(),
                None => {
                    let r = sim.routes.routes(graph, od.0, od.1, &[])?[0].links.clone();
                    shortest.insert(od, r.clone());
                    r
                }
            };
            let m_t = ghost(&a.trip.profile, &best)?;
            let mean = average.push(travel);
            results.trace.push(TraceRow {
                time_s: a.time,
                vehicle: a.id,
                travel_s: travel,
                mean_s: mean,
            });
            results.vehicles.push(row(graph, a.id, &a.trip, Some(a.time), Some((travel, unhindered, m_t))));
        }
        debug_assert_eq!(results.spawned, results.vehicles.len() as u64 + sim.in_network() as u64);
        tick += 1;
    }
    results.ticks = tick;
    results.partial = sim.in_network() > 0;
    let left: Vec<(u64, Trip)> = std::mem::take(&mut sim.trips).into_iter().collect();
    for (id, trip) in left {
        results.vehicles.push(row(graph, id, &trip, None, None));
    }
    results.vehicles.sort_by_key(|v| v.id);
    for (j, m) in sim.managers.iter_mut().enumerate() {
        results.intersections.push(IntersectionRow {
            intersection: m.name.clone(),
            requests: m.requests,
            rejections: m.rejections,
            revenue: sim.revenue[j],
        });
        results.auctions.append(&mut m.log);
    }
    results
        .auctions
        .sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then_with(|| a.intersection.cmp(&b.intersection)));
    results.prices = std::mem::take(&mut sim.price_log);
    if sim.misses > 0 {
        log::debug!("{} bookings given up in `{name}`", sim.misses);
    }
    Ok(results)
}

fn row(graph: &NetworkGraph, id: u64, trip: &Trip, exit: Option<f64>, times: Option<(f64, f64, f64)>) -> VehicleRow {
    let route = if trip.taken.is_empty() { &trip.route } else { &trip.taken };
    VehicleRow {
        id,
        origin: graph.node(trip.profile.origin).name.clone(),
        destination: graph.node(trip.profile.destination).name.clone(),
        spawn_s: trip.spawn_s,
        completion_s: exit,
        completed: exit.is_some(),
        route: Route::new(graph, route.clone()).label(graph),
        bid: trip.profile.valuation,
        tracked: trip.profile.tracked,
        spent: trip.profile.spent,
        travel_s: times.map(|t| t.0),
        unhindered_s: times.map(|t| t.1),
        delay_s: times.map(|(t, u, _)| delay(t, u)),
        shortest_s: times.map(|t| t.2),
        normalized_delay: times.map(|(t, _, m)| normalized_delay(t, m)),
        rejections: trip.rejections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::build_junctions;
    use crate::roadnet::load_network;
    use crate::scenario::ScenarioDoc;

    fn grid() -> ScenarioDoc {
        ScenarioDoc::from_toml_str(include_str!("../../../../scenarios/grid_4x4.toml")).unwrap()
    }

    /// The grid with its two hot flows at `hot` vehicles per minute and a
    /// shorter spawn window.
    fn loaded(mode: Mode, hot: f64, window: f64) -> ScenarioDoc {
        let mut doc = grid();
        for d in &mut doc.demand {
            if d.rate_per_min.is_some() {
                d.rate_per_min = Some(hot);
            }
        }
        doc.run.mode = mode;
        doc.run.spawn_window_s = window;
        doc.run.wdp_passes = 50;
        doc
    }

    #[test]
    fn lone_vehicle_is_not_delayed() {
        let doc = grid();
        let graph = load_network(&doc).unwrap();
        let junctions = build_junctions(&graph).unwrap();
        let demand = Demand {
            fixed: vec![((graph.node_id("W2").unwrap(), graph.node_id("E3").unwrap()), 1.0)],
            ..Default::default()
        };
        for mode in Mode::ALL {
            let config = RunConfig {
                mode,
                spawn_window_s: 5.0,
                ..doc.run.clone()
            };
            let r = (0..200)
                .map(|seed| run("t", &graph, &junctions, &demand, &RunConfig { seed, ..config.clone() }).unwrap())
                .find(|r| r.spawned == 1)
                .unwrap();
            let v = &r.vehicles[0];
            assert!(v.completed, "{mode}");
            assert!(v.delay_s.unwrap() < 1e-9, "{mode}: {v:?}");
            assert!(v.normalized_delay.unwrap() < 1e-9, "{mode}: {v:?}");
            // Two 200 m stubs and four 400 m links, at no more than the limit.
            assert!(v.travel_s.unwrap() >= 2000.0 / 13.89, "{v:?}");
        }
    }

    #[test]
    fn reruns_are_identical() {
        for mode in Mode::ALL {
            let doc = loaded(mode, 12.0, 240.0);
            assert_eq!(crate::engine::run(&doc).unwrap(), crate::engine::run(&doc).unwrap(), "{mode}");
        }
    }

    #[test]
    fn vehicles_and_money_are_conserved() {
        for mode in Mode::ALL {
            let r = crate::engine::run(&loaded(mode, 20.0, 300.0)).unwrap();
            assert!(r.spawned > 100);
            assert_eq!(r.vehicles.len() as u64, r.spawned);
            assert!(!r.partial && r.vehicles.iter().all(|v| v.completed), "{mode}");
            let (spent, revenue) = (r.spending(), r.revenue());
            assert!((spent - revenue).abs() <= 1e-6 * revenue.max(1.0), "{mode}: {spent} vs {revenue}");
            if mode.is_priced() || mode.is_auction() {
                assert!(revenue > 0.0, "{mode}");
            } else {
                assert_eq!(revenue, 0.0);
            }
            let mean = r.vehicles.iter().map(|v| v.travel_s.unwrap()).sum::<f64>() / r.vehicles.len() as f64;
            assert!((r.trace.last().unwrap().mean_s - mean).abs() < 1e-9);
            for v in &r.vehicles {
                assert!(v.delay_s.unwrap() >= 0.0 && v.normalized_delay.unwrap() >= -1e-9, "{v:?}");
            }
        }
    }

    #[test]
    fn priced_drivers_leave_the_shortest_route() {
        let detours = |mode| {
            let r = crate::engine::run(&loaded(mode, 20.0, 600.0)).unwrap();
            r.vehicles
                .iter()
                .filter(|v| v.unhindered_s.unwrap() > v.shortest_s.unwrap() + 1.0)
                .count()
        };
        assert_eq!(detours(Mode::Fcfs), 0);
        assert!(detours(Mode::Cta) > 0);
    }

    #[test]
    fn densities_and_distances_are_sampled() {
        let r = crate::engine::run(&loaded(Mode::Fcfs, 20.0, 300.0)).unwrap();
        let g23 = r.density_series("intersection", "G23");
        assert!(g23.len() > 30);
        assert!(g23.windows(2).all(|w| (w[1].0 - w[0].0 - 10.0).abs() < 1e-9));
        assert!(g23.iter().any(|&(_, d)| d > 0.0));
        assert!(r.distances.iter().all(|d| d.d_i_m >= 0.0 && d.d_i_m <= 400.0));
    }
}
