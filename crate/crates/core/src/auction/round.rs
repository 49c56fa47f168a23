use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::bids::{validate_bid, Bid, BidSet};
use super::search::{wdp_stochastic, Budget};
use crate::error::Result;
use crate::isect::{confirmation, log_reply, log_request};
use crate::isect::{
    conflicts, reservation_distance, trajectory_tiles, Confirmation, DistanceFilter, IntersectionGeometry,
    RejectReason, Rejection, Reply, ReservationRequest, ReservationTable, VehicleId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundConfig {
    pub wp: f64,
    pub np: f64,
    pub budget: Budget,
    /// Tick length used to discretise bundles.
    pub dt: f64,
    /// Keep the bid set handed to winner determination in the outcome.
    pub capture: bool,
}

/// Last bid value per vehicle, for the no-decrease rule.
#[derive(Debug, Clone, Default)]
pub struct BidHistory {
    prior: HashMap<VehicleId, f64>,
}

impl BidHistory {
    pub fn prior(&self, vehicle: VehicleId) -> Option<f64> {
        self.prior.get(&vehicle).copied()
    }

    pub fn forget(&mut self, vehicle: VehicleId) {
        self.prior.remove(&vehicle);
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoundOutcome {
    pub confirmations: Vec<Confirmation>,
    pub rejections: Vec<Rejection>,
    /// Bids that reached winner determination.
    pub candidates: usize,
    pub winner_value: f64,
    /// The winner determination instance, when captured.
    pub instance: Option<BidSet>,
}

impl RoundOutcome {
    pub fn replies(&self) -> impl Iterator<Item = Reply> + '_ {
        self.confirmations
            .iter()
            .cloned()
            .map(Reply::Confirmed)
            .chain(self.rejections.iter().cloned().map(Reply::Rejected))
    }
}

/// Closes one auction round at time `now`.
///
/// Bids pass the reservation-distance filter, the no-decrease rule and the
/// reserve price, then lose outright if they overlap a confirmed booking.
/// The survivors go to winner determination; winners are booked and pay
/// their bid, everyone else is rejected.
#[allow(clippy::too_many_arguments)]
pub fn run_auction_round<R: Rng + ?Sized>(
    requests: Vec<ReservationRequest>,
    reserve: impl Fn(&ReservationRequest) -> f64,
    geometry: &IntersectionGeometry,
    table: &mut ReservationTable,
    filter: &mut DistanceFilter,
    history: &mut BidHistory,
    now: f64,
    config: &RoundConfig,
    rng: &mut R,
) -> Result<RoundOutcome> {
    // A later request from the same vehicle withdraws the earlier one.
    let latest: BTreeMap<VehicleId, ReservationRequest> =
        requests.into_iter().map(|r| (r.vehicle, r)).collect();

    let mut out = RoundOutcome::default();
    let reject = |out: &mut RoundOutcome, vehicle, reason| {
        out.rejections.push(Rejection { vehicle, reason });
    };
    let mut live = Vec::new();
    let mut distances = HashMap::new();
    let mut admitted = Vec::new();
    for (vehicle, request) in latest {
        log_request(&request, now);
        if let Err(e) = request.validate(now) {
            reject(&mut out, vehicle, RejectReason::Malformed(e.to_string()));
            continue;
        }
        let Some(value) = request.bid else {
            reject(&mut out, vehicle, RejectReason::Malformed("missing bid".into()));
            continue;
        };
        let (side, lane) = request.lane_key();
        let distance = reservation_distance(&request, now);
        let limit = filter.limit(side, lane);
        if !filter.admits(side, lane, distance) {
            reject(&mut out, vehicle, RejectReason::Distance { distance, limit });
            continue;
        }
        let prior = history.prior(vehicle);
        if validate_bid(value, prior).is_err() {
            let prior = prior.unwrap_or_default();
            reject(&mut out, vehicle, RejectReason::BidDecrease { prior, new: value });
            continue;
        }
        history.prior.insert(vehicle, value);
        let floor = reserve(&request);
        if value < floor {
            reject(&mut out, vehicle, RejectReason::BelowReserve { bid: value, reserve: floor });
            continue;
        }
        admitted.push((vehicle, request, value, side, lane, distance));
    }
    // Every admitted bidder withdraws its old booking before any bundle is
    // checked, so the outcome does not depend on processing order.
    for (vehicle, ..) in &admitted {
        table.remove(*vehicle);
    }
    for (vehicle, request, value, side, lane, distance) in admitted {
        let bundle = match trajectory_tiles(&request, geometry, config.dt) {
            Ok(b) => b,
            Err(e) => {
                reject(&mut out, vehicle, RejectReason::Malformed(e.to_string()));
                continue;
            }
        };
        if conflicts(&bundle, table, Some(vehicle)) {
            filter.on_conflict(side, lane, distance);
            reject(&mut out, vehicle, RejectReason::Conflict);
            continue;
        }
        distances.insert(vehicle, distance);
        live.push(Bid {
            request,
            value,
            bundle,
        });
    }

    let set = BidSet::new(live)?;
    out.candidates = set.len();
    if config.capture {
        out.instance = Some(set.clone());
    }
    let winners = wdp_stochastic(&set, config.budget, config.wp, config.np, rng);
    out.winner_value = winners.value;
    let mut won = vec![false; set.len()];
    for &i in &winners.members {
        won[i] = true;
    }
    let mut losers = Vec::new();
    for (i, bid) in set.into_bids().into_iter().enumerate() {
        let (side, lane) = bid.request.lane_key();
        if won[i] {
            filter.on_confirm(side, lane);
            table.book(bid.request.clone(), bid.bundle.clone())?;
            out.confirmations.push(confirmation(&bid.request, bid.bundle, bid.value));
        } else {
            losers.push((side, lane, distances[&bid.id()]));
            out.rejections.push(Rejection {
                vehicle: bid.id(),
                reason: RejectReason::Outbid,
            });
        }
    }
    // Losers lower their lane limit after the winners have reset theirs.
    for (side, lane, d) in losers {
        filter.on_conflict(side, lane, d);
    }
    for reply in out.replies() {
        log_reply(&reply, now);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{DEFAULT_NP, DEFAULT_WP};
    use crate::isect::{GeometrySpec, Side, Turn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (IntersectionGeometry, ReservationTable, DistanceFilter, BidHistory) {
        (
            IntersectionGeometry::four_way(&GeometrySpec::default(), 3).unwrap(),
            ReservationTable::new(),
            DistanceFilter::new(),
            BidHistory::default(),
        )
    }

    fn config() -> RoundConfig {
        RoundConfig {
            wp: DEFAULT_WP,
            np: DEFAULT_NP,
            budget: Budget::Passes(50),
            dt: 1.0,
            capture: false,
        }
    }

    fn bid(vehicle: u64, side: Side, lane: u8, t_a: f64, value: f64) -> ReservationRequest {
        ReservationRequest {
            vehicle,
            arrival_time: t_a,
            arrival_speed: 10.0,
            side,
            lane,
            turn: Turn::Straight,
            bid: Some(value),
        }
    }

    fn run(
        reqs: Vec<ReservationRequest>,
        s: &mut (IntersectionGeometry, ReservationTable, DistanceFilter, BidHistory),
    ) -> RoundOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        run_auction_round(reqs, |_| 0.0, &s.0, &mut s.1, &mut s.2, &mut s.3, 0.0, &config(), &mut rng).unwrap()
    }

    #[test]
    fn single_bid_is_confirmed_and_pays_its_bid() {
        let mut s = setup();
        let out = run(vec![bid(1, Side::South, 1, 3.0, 80.0)], &mut s);
        assert_eq!(out.confirmations.len(), 1);
        assert!(out.rejections.is_empty());
        assert_eq!(out.confirmations[0].payment, 80.0);
        assert_eq!(s.1.len(), 1);
    }

    #[test]
    fn crossing_bid_loses_to_three_parallel_bids() {
        let mut s = setup();
        let reqs = vec![
            bid(1, Side::East, 1, 3.5, 200.0),
            bid(2, Side::South, 0, 3.0, 100.0),
            bid(3, Side::South, 1, 3.0, 100.0),
            bid(4, Side::South, 2, 3.0, 100.0),
        ];
        let out = run(reqs, &mut s);
        let mut won: Vec<u64> = out.confirmations.iter().map(|c| c.vehicle).collect();
        won.sort();
        assert_eq!(won, vec![2, 3, 4]);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].reason, RejectReason::Outbid);
        assert_eq!(out.winner_value, 300.0);
        // Loser at 35 m lowers its lane limit.
        assert_eq!(s.2.limit(Side::East, 1), 35.0);
        assert_eq!(s.2.limit(Side::South, 1), f64::INFINITY);
    }

    #[test]
    fn confirmed_bookings_are_never_displaced() {
        let mut s = setup();
        run(vec![bid(1, Side::South, 1, 3.0, 10.0)], &mut s);
        let out = run(vec![bid(2, Side::East, 1, 3.5, 10_000.0)], &mut s);
        assert_eq!(out.rejections[0].reason, RejectReason::Conflict);
        assert_eq!(s.1.reservation(1).unwrap().request.arrival_time, 3.0);
    }

    #[test]
    fn lowered_bid_and_reserve_are_rejected() {
        let mut s = setup();
        let out = run(vec![bid(1, Side::South, 1, 3.0, 100.0)], &mut s);
        assert_eq!(out.confirmations.len(), 1);
        let out = run(vec![bid(1, Side::South, 1, 4.0, 90.0)], &mut s);
        assert_eq!(out.rejections[0].reason, RejectReason::BidDecrease { prior: 100.0, new: 90.0 });

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_auction_round(
            vec![bid(7, Side::North, 0, 3.0, 40.0)],
            |_| 50.0,
            &s.0,
            &mut s.1,
            &mut s.2,
            &mut s.3,
            0.0,
            &config(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.rejections[0].reason, RejectReason::BelowReserve { bid: 40.0, reserve: 50.0 });
    }

    #[test]
    fn later_request_of_a_vehicle_replaces_the_earlier() {
        let mut s = setup();
        let out = run(vec![bid(1, Side::South, 1, 3.0, 100.0), bid(1, Side::South, 1, 5.0, 100.0)], &mut s);
        assert_eq!(out.confirmations.len(), 1);
        assert_eq!(out.confirmations[0].arrival_time, 5.0);
    }
}
