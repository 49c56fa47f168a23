use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{IntersectionGeometry, Side, Turn};
use super::table::{conflicts, trajectory_tiles, Bundle, Reservation, ReservationTable, VehicleId};
use crate::error::{Error, Result};

/// REQUEST message: a vehicle's claim on the intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationRequest {
    pub vehicle: VehicleId,
    /// Time the front reaches the stop line, seconds.
    pub arrival_time: f64,
    /// Constant crossing speed, m/s.
    pub arrival_speed: f64,
    pub side: Side,
    pub lane: u8,
    pub turn: Turn,
    /// Money offered, present under auction control.
    pub bid: Option<f64>,
}

impl ReservationRequest {
    pub fn validate(&self, now: f64) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::MalformedRequest {
                vehicle: self.vehicle,
                reason,
            })
        };
        if !(self.arrival_speed > 0.0) || !self.arrival_speed.is_finite() {
            return bad(format!("arrival speed {}", self.arrival_speed));
        }
        if !self.arrival_time.is_finite() || self.arrival_time <= now {
            return bad(format!("arrival time {} not after {now}", self.arrival_time));
        }
        if let Some(b) = self.bid {
            if !(b >= 0.0) || !b.is_finite() {
                return bad(format!("bid {b}"));
            }
        }
        Ok(())
    }

    pub fn lane_key(&self) -> (Side, u8) {
        (self.side, self.lane)
    }
}

/// d(r) = v_a (t_a - now).
pub fn reservation_distance(request: &ReservationRequest, now: f64) -> f64 {
    request.arrival_speed * (request.arrival_time - now)
}

const DISTANCE_SLACK_M: f64 = 1e-6;

/// Per-lane maximum reservation distance d_i, initially infinite.
#[derive(Debug, Clone, Default)]
pub struct DistanceFilter {
    limits: BTreeMap<(Side, u8), f64>,
}

impl DistanceFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn limit(&self, side: Side, lane: u8) -> f64 {
        self.limits.get(&(side, lane)).copied().unwrap_or(f64::INFINITY)
    }

    /// Requests farther than d_i are refused unprocessed. Distances are
    /// compared with a micrometre of slack so that two requests made from
    /// the same spot are treated alike despite rounding in t_a - now.
    pub fn admits(&self, side: Side, lane: u8, distance: f64) -> bool {
        distance <= self.limit(side, lane) + DISTANCE_SLACK_M
    }

    pub fn on_confirm(&mut self, side: Side, lane: u8) {
        self.limits.remove(&(side, lane));
    }

    pub fn on_conflict(&mut self, side: Side, lane: u8, distance: f64) {
        let d = self.limits.entry((side, lane)).or_insert(f64::INFINITY);
        *d = d.min(distance);
    }

    pub fn lanes(&self) -> impl Iterator<Item = ((Side, u8), f64)> + '_ {
        self.limits.iter().map(|(k, v)| (*k, *v))
    }
}

/// CONFIRM message.
#[derive(Debug, Clone, PartialEq)]
pub struct Confirmation {
    pub vehicle: VehicleId,
    pub arrival_time: f64,
    pub arrival_speed: f64,
    pub side: Side,
    pub lane: u8,
    pub turn: Turn,
    pub bundle: Bundle,
    /// Amount charged on confirmation (the bid under first-price auctions).
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    /// d(r) > d_i; not processed.
    Distance { distance: f64, limit: f64 },
    /// Overlaps a confirmed reservation.
    Conflict,
    /// Bid lower than the vehicle's previous bid.
    BidDecrease { prior: f64, new: f64 },
    /// Bid below the intersection's reserve price.
    BelowReserve { bid: f64, reserve: f64 },
    /// Lost the winner determination.
    Outbid,
    Malformed(String),
}

/// REJECT message.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub vehicle: VehicleId,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Confirmed(Confirmation),
    Rejected(Rejection),
}

impl Reply {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, Reply::Confirmed(_))
    }

    pub fn vehicle(&self) -> VehicleId {
        match self {
            Reply::Confirmed(c) => c.vehicle,
            Reply::Rejected(r) => r.vehicle,
        }
    }
}

pub(crate) fn log_request(r: &ReservationRequest, now: f64) {
    log::debug!(
        target: "aimsim::messages",
        "REQUEST t={now:.3} vehicle={} arrival_time={:.3} arrival_speed={:.3} side={:?} lane={} turn={:?} bid={:?}",
        r.vehicle, r.arrival_time, r.arrival_speed, r.side, r.lane, r.turn, r.bid
    );
}

pub(crate) fn log_reply(reply: &Reply, now: f64) {
    match reply {
        Reply::Confirmed(c) => log::debug!(
            target: "aimsim::messages",
            "CONFIRM t={now:.3} vehicle={} arrival_time={:.3} arrival_speed={:.3} slots={} payment={:.2}",
            c.vehicle, c.arrival_time, c.arrival_speed, c.bundle.len(), c.payment
        ),
        Reply::Rejected(r) => log::debug!(
            target: "aimsim::messages",
            "REJECT t={now:.3} vehicle={} reason={:?}",
            r.vehicle, r.reason
        ),
    }
}

pub(crate) fn confirmation(request: &ReservationRequest, bundle: Bundle, payment: f64) -> Confirmation {
    Confirmation {
        vehicle: request.vehicle,
        arrival_time: request.arrival_time,
        arrival_speed: request.arrival_speed,
        side: request.side,
        lane: request.lane,
        turn: request.turn,
        bundle,
        payment,
    }
}

/// First-come-first-served handling of one request.
pub fn fcfs_process(
    request: &ReservationRequest,
    geometry: &IntersectionGeometry,
    table: &mut ReservationTable,
    filter: &mut DistanceFilter,
    now: f64,
    dt: f64,
) -> Result<Reply> {
    log_request(request, now);
    request.validate(now)?;
    let (side, lane) = request.lane_key();
    let distance = reservation_distance(request, now);
    let limit = filter.limit(side, lane);
    let reply = if !filter.admits(side, lane, distance) {
        Reply::Rejected(Rejection {
            vehicle: request.vehicle,
            reason: RejectReason::Distance { distance, limit },
        })
    } else {
        table.remove(request.vehicle);
        let bundle = trajectory_tiles(request, geometry, dt)?;
        if conflicts(&bundle, table, Some(request.vehicle)) {
            filter.on_conflict(side, lane, distance);
            Reply::Rejected(Rejection {
                vehicle: request.vehicle,
                reason: RejectReason::Conflict,
            })
        } else {
            filter.on_confirm(side, lane);
            table.book(request.clone(), bundle.clone())?;
            Reply::Confirmed(confirmation(request, bundle, 0.0))
        }
    };
    log_reply(&reply, now);
    Ok(reply)
}

/// Releases the booking of a vehicle that has left the intersection.
pub fn consume_reservation(vehicle: VehicleId, table: &mut ReservationTable) -> Result<Reservation> {
    table.remove(vehicle).ok_or(Error::UnknownVehicle(vehicle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isect::{GeometrySpec, TileSlot};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geometry() -> IntersectionGeometry {
        IntersectionGeometry::four_way(&GeometrySpec::default(), 3).unwrap()
    }

    fn req(vehicle: u64, side: Side, lane: u8, turn: Turn, t_a: f64, v_a: f64) -> ReservationRequest {
        ReservationRequest {
            vehicle,
            arrival_time: t_a,
            arrival_speed: v_a,
            side,
            lane,
            turn,
            bid: None,
        }
    }

    #[test]
    fn distance_examples() {
        let r = req(1, Side::South, 0, Turn::Straight, 105.0, 10.0);
        assert_eq!(reservation_distance(&r, 100.0), 50.0);
        assert_eq!(reservation_distance(&r, 105.0), 0.0);
        let r = req(1, Side::South, 0, Turn::Straight, 102.0, 13.89);
        assert!((reservation_distance(&r, 100.0) - 27.78).abs() < 1e-9);
    }

    #[test]
    fn first_request_confirms() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let r = req(1, Side::South, 1, Turn::Straight, 4.0, 10.0);
        assert!(fcfs_process(&r, &g, &mut t, &mut f, 0.0, 1.0).unwrap().is_confirmed());
        assert_eq!(f.limit(Side::South, 1), f64::INFINITY);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn conflict_lowers_the_lane_limit() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let first = req(1, Side::East, 1, Turn::Straight, 4.5, 10.0);
        assert!(fcfs_process(&first, &g, &mut t, &mut f, 0.0, 1.0).unwrap().is_confirmed());
        // 10 m/s, 4 s out: d(r) = 40 m.
        let second = req(2, Side::South, 1, Turn::Straight, 4.0, 10.0);
        let reply = fcfs_process(&second, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        assert_eq!(
            reply,
            Reply::Rejected(Rejection { vehicle: 2, reason: RejectReason::Conflict })
        );
        assert_eq!(f.limit(Side::South, 1), 40.0);

        // 60 m away: refused without looking at the table.
        let far = req(3, Side::South, 1, Turn::Straight, 6.0, 10.0);
        let occupied = t.occupied();
        let reply = fcfs_process(&far, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        assert!(matches!(
            reply,
            Reply::Rejected(Rejection { reason: RejectReason::Distance { .. }, .. })
        ));
        assert_eq!(f.limit(Side::South, 1), 40.0);
        assert_eq!(t.occupied(), occupied);
    }

    #[test]
    fn filtered_request_keeps_prior_booking() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let r = req(1, Side::South, 1, Turn::Straight, 8.0, 10.0);
        fcfs_process(&r, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        f.on_conflict(Side::South, 1, 10.0);
        let again = req(1, Side::South, 1, Turn::Straight, 9.0, 10.0);
        fcfs_process(&again, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        assert_eq!(t.reservation(1).unwrap().request.arrival_time, 8.0);
    }

    #[test]
    fn rerequest_replaces_the_old_booking() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let r = req(1, Side::South, 1, Turn::Straight, 3.0, 10.0);
        fcfs_process(&r, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        // Overlapping its own booking is not a conflict.
        let r2 = req(1, Side::South, 1, Turn::Straight, 3.5, 10.0);
        assert!(fcfs_process(&r2, &g, &mut t, &mut f, 0.0, 1.0).unwrap().is_confirmed());
        assert_eq!(t.len(), 1);
        assert_eq!(t.reservation(1).unwrap().request.arrival_time, 3.5);
    }

    #[test]
    fn consume_examples() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let a = req(1, Side::South, 0, Turn::Straight, 3.0, 10.0);
        let b = req(2, Side::North, 0, Turn::Straight, 3.0, 10.0);
        fcfs_process(&a, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        fcfs_process(&b, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
        let kept: Vec<TileSlot> = t.reservation(2).unwrap().bundle.slots().collect();
        consume_reservation(1, &mut t).unwrap();
        assert!(kept.iter().all(|s| t.holder(*s) == Some(2)));
        consume_reservation(2, &mut t).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.occupied(), 0);
        assert!(matches!(consume_reservation(9, &mut t), Err(Error::UnknownVehicle(9))));
    }

    #[test]
    fn malformed_requests() {
        let g = geometry();
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let r = req(1, Side::South, 0, Turn::Straight, 3.0, 0.0);
        assert!(fcfs_process(&r, &g, &mut t, &mut f, 0.0, 1.0).is_err());
        let r = req(1, Side::South, 0, Turn::Straight, 3.0, 5.0);
        assert!(fcfs_process(&r, &g, &mut t, &mut f, 3.0, 1.0).is_err());
    }

    fn random_request(rng: &mut ChaCha8Rng, g: &IntersectionGeometry, now: f64) -> ReservationRequest {
        loop {
            let side = Side::from_index(rng.random_range(0..4));
            let lane = rng.random_range(0..3);
            let turn = Turn::ALL[rng.random_range(0..3)];
            if g.is_legal(crate::isect::PathKey { side, lane, turn }) {
                return req(
                    rng.random_range(0..40),
                    side,
                    lane,
                    turn,
                    now + rng.random_range(0.5..12.0),
                    rng.random_range(3.0..14.0),
                );
            }
        }
    }

    /// Recomputes occupancy from the bookings alone.
    fn assert_no_double_booking(t: &ReservationTable) {
        let mut seen = std::collections::HashMap::new();
        for (v, r) in t.reservations() {
            assert_eq!(r.request.vehicle, *v);
            for s in r.bundle.slots() {
                if let Some(other) = seen.insert(s, *v) {
                    panic!("slot {s:?} held by {other} and {v}");
                }
            }
        }
        assert_eq!(seen.len(), t.occupied());
    }

    #[test]
    fn fuzz_ten_thousand_requests_never_double_book() {
        let g = geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
        let mut now = 0.0;
        for i in 0..10_000 {
            if i % 25 == 0 {
                now += 1.0;
                // Vehicles whose slot lies in the past leave.
                let done: Vec<u64> = t
                    .reservations()
                    .filter(|(_, r)| r.request.arrival_time < now)
                    .map(|(v, _)| *v)
                    .collect();
                for v in done {
                    consume_reservation(v, &mut t).unwrap();
                }
            }
            let r = random_request(&mut rng, &g, now);
            let d = reservation_distance(&r, now);
            let reply = fcfs_process(&r, &g, &mut t, &mut f, now, 1.0).unwrap();
            match reply {
                Reply::Confirmed(_) => assert_eq!(f.limit(r.side, r.lane), f64::INFINITY),
                Reply::Rejected(Rejection { reason: RejectReason::Conflict, .. }) => {
                    assert!(f.limit(r.side, r.lane) <= d)
                }
                _ => {}
            }
            if i % 500 == 0 {
                assert_no_double_booking(&t);
            }
        }
        assert_no_double_booking(&t);
    }

    proptest! {
        #[test]
        fn table_holds_at_most_one_booking_per_vehicle(seed in 0u64..1000) {
            let g = geometry();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut t, mut f) = (ReservationTable::new(), DistanceFilter::new());
            for _ in 0..60 {
                let mut r = random_request(&mut rng, &g, 0.0);
                r.vehicle %= 5;
                fcfs_process(&r, &g, &mut t, &mut f, 0.0, 1.0).unwrap();
                prop_assert!(t.len() <= 5);
                for (v, res) in t.reservations() {
                    prop_assert_eq!(*v, res.request.vehicle);
                }
            }
            assert_no_double_booking(&t);
        }
    }
}
