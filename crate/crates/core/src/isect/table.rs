use std::collections::{BTreeMap, HashMap};

use super::geometry::{IntersectionGeometry, PathKey};
use super::protocol::ReservationRequest;
use crate::error::{Error, Result};

pub type VehicleId = u64;

/// One (tile, time-step) item packed as `step << 24 | tile`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileSlot(pub u64);

impl TileSlot {
    pub fn new(tile: u32, step: u64) -> Self {
        debug_assert!(tile < 1 << 24);
        TileSlot(step << 24 | tile as u64)
    }

    pub fn tile(self) -> u32 {
        (self.0 & 0xff_ffff) as u32
    }

    pub fn step(self) -> u64 {
        self.0 >> 24
    }
}

/// A set of tile-time slots stored as one tile bitset per occupied step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bundle {
    rows: Vec<(u64, Box<[u64]>)>,
}

impl Bundle {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows
            .iter()
            .map(|(_, r)| r.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .sum()
    }

    pub fn steps(&self) -> impl Iterator<Item = u64> + '_ {
        self.rows.iter().map(|(s, _)| *s)
    }

    pub fn first_step(&self) -> Option<u64> {
        self.rows.first().map(|(s, _)| *s)
    }

    pub fn last_step(&self) -> Option<u64> {
        self.rows.last().map(|(s, _)| *s)
    }

    pub fn slots(&self) -> impl Iterator<Item = TileSlot> + '_ {
        self.rows.iter().flat_map(|(step, row)| {
            row.iter().enumerate().flat_map(move |(w, &bits)| {
                let mut bits = bits;
                std::iter::from_fn(move || {
                    if bits == 0 {
                        return None;
                    }
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    Some(TileSlot::new(w as u32 * 64 + b, *step))
                })
            })
        })
    }

    pub fn contains(&self, slot: TileSlot) -> bool {
        let t = slot.tile() as usize;
        self.row(slot.step())
            .is_some_and(|r| r.get(t / 64).is_some_and(|w| w & (1 << (t % 64)) != 0))
    }

    fn row(&self, step: u64) -> Option<&[u64]> {
        self.rows
            .binary_search_by_key(&step, |(s, _)| *s)
            .ok()
            .map(|i| &*self.rows[i].1)
    }

    pub fn intersects(&self, other: &Bundle) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.rows.len() && j < other.rows.len() {
            let (sa, ra) = &self.rows[i];
            let (sb, rb) = &other.rows[j];
            match sa.cmp(sb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if ra.iter().zip(rb.iter()).any(|(a, b)| a & b != 0) {
                        return true;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        false
    }

    /// Same tiles, every step moved by `delta`.
    pub fn shifted(&self, delta: i64) -> Bundle {
        Bundle {
            rows: self
                .rows
                .iter()
                .map(|(s, r)| ((*s as i64 + delta) as u64, r.clone()))
                .collect(),
        }
    }

    /// Builds a bundle from explicit slots; `words` is the row width.
    pub fn from_slots(slots: impl IntoIterator<Item = TileSlot>, words: usize) -> Bundle {
        let mut rows: BTreeMap<u64, Box<[u64]>> = BTreeMap::new();
        for s in slots {
            let row = rows
                .entry(s.step())
                .or_insert_with(|| vec![0; words].into_boxed_slice());
            let t = s.tile() as usize;
            row[t / 64] |= 1 << (t % 64);
        }
        Bundle {
            rows: rows.into_iter().collect(),
        }
    }
}

/// Tiles swept by a constant-speed traversal at `v_a` starting at `t_a`,
/// dilated to whole steps of length `dt`.
pub fn trajectory_tiles(
    request: &ReservationRequest,
    geometry: &IntersectionGeometry,
    dt: f64,
) -> Result<Bundle> {
    let key = PathKey {
        side: request.side,
        lane: request.lane,
        turn: request.turn,
    };
    let total = geometry.crossing_distance(key)?;
    let (t_a, v_a) = (request.arrival_time, request.arrival_speed);
    if !(v_a > 0.0) || !v_a.is_finite() || !t_a.is_finite() || t_a < 0.0 {
        return Err(Error::MalformedRequest {
            vehicle: request.vehicle,
            reason: format!("arrival t={t_a} v={v_a}"),
        });
    }
    let t_end = t_a + total / v_a;
    let k0 = (t_a / dt + 1e-9).floor() as u64;
    let k1 = ((t_end / dt - 1e-9).ceil() as u64).saturating_sub(1).max(k0);
    let words = geometry.words();
    let mut rows = Vec::with_capacity((k1 - k0 + 1) as usize);
    for k in k0..=k1 {
        let t0 = (k as f64 * dt).max(t_a);
        let t1 = ((k + 1) as f64 * dt).min(t_end);
        let mut row = vec![0u64; words].into_boxed_slice();
        geometry.sweep_into(key, v_a * (t0 - t_a), v_a * (t1 - t_a), &mut row)?;
        if row.iter().any(|&w| w != 0) {
            rows.push((k, row));
        }
    }
    Ok(Bundle { rows })
}

/// A confirmed booking.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub request: ReservationRequest,
    pub bundle: Bundle,
}

/// Confirmed bookings of one intersection.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    rows: HashMap<u64, Box<[u64]>>,
    bookings: BTreeMap<VehicleId, Reservation>,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.bookings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bookings.len()
    }

    pub fn reservation(&self, vehicle: VehicleId) -> Option<&Reservation> {
        self.bookings.get(&vehicle)
    }

    pub fn reservations(&self) -> impl Iterator<Item = (&VehicleId, &Reservation)> {
        self.bookings.iter()
    }

    /// Vehicle holding `slot`, if any.
    pub fn holder(&self, slot: TileSlot) -> Option<VehicleId> {
        self.bookings
            .iter()
            .find(|(_, r)| r.bundle.contains(slot))
            .map(|(v, _)| *v)
    }

    /// Number of booked slots.
    pub fn occupied(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .sum()
    }

    /// Books `bundle` for `vehicle`. The caller must have checked conflicts;
    /// a double booking is reported as an error and leaves the table as is.
    pub fn book(&mut self, request: ReservationRequest, bundle: Bundle) -> Result<()> {
        let vehicle = request.vehicle;
        if self.bookings.contains_key(&vehicle) {
            return Err(Error::MalformedRequest {
                vehicle,
                reason: "vehicle already holds a reservation".into(),
            });
        }
        if conflicts(&bundle, self, None) {
            return Err(Error::MalformedRequest {
                vehicle,
                reason: "bundle overlaps a confirmed reservation".into(),
            });
        }
        for (step, row) in &bundle.rows {
            let slot = self
                .rows
                .entry(*step)
                .or_insert_with(|| vec![0; row.len()].into_boxed_slice());
            for (a, b) in slot.iter_mut().zip(row.iter()) {
                *a |= b;
            }
        }
        self.bookings.insert(vehicle, Reservation { request, bundle });
        Ok(())
    }

    /// Removes the booking of `vehicle`, returning it.
    pub fn remove(&mut self, vehicle: VehicleId) -> Option<Reservation> {
        let res = self.bookings.remove(&vehicle)?;
        for (step, row) in &res.bundle.rows {
            if let Some(slot) = self.rows.get_mut(step) {
                for (a, b) in slot.iter_mut().zip(row.iter()) {
                    *a &= !b;
                }
                if slot.iter().all(|&w| w == 0) {
                    self.rows.remove(step);
                }
            }
        }
        Some(res)
    }
}

/// True iff `bundle` overlaps a booking not held by `requester`.
pub fn conflicts(bundle: &Bundle, table: &ReservationTable, requester: Option<VehicleId>) -> bool {
    let own = requester.and_then(|v| table.bookings.get(&v)).map(|r| &r.bundle);
    bundle.rows.iter().any(|(step, row)| {
        let Some(booked) = table.rows.get(step) else {
            return false;
        };
        let mine = own.and_then(|b| b.row(*step));
        row.iter().zip(booked.iter()).enumerate().any(|(w, (a, b))| {
            let hit = a & b;
            let hit = match mine {
                Some(m) => hit & !m[w],
                None => hit,
            };
            hit != 0
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isect::{GeometrySpec, Side, Turn};

    fn request(vehicle: u64, side: Side, lane: u8, turn: Turn, t_a: f64, v_a: f64) -> ReservationRequest {
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

    /// Two lanes each way, 3 m lanes: a 12 m box.
    fn twelve_metre_box() -> IntersectionGeometry {
        IntersectionGeometry::four_way(&GeometrySpec::default(), 2).unwrap()
    }

    #[test]
    fn slot_packing_round_trips() {
        let s = TileSlot::new(5183, 123_456);
        assert_eq!(s.tile(), 5183);
        assert_eq!(s.step(), 123_456);
    }

    #[test]
    fn straight_crossing_occupies_entry_and_exit_steps() {
        let g = twelve_metre_box();
        assert_eq!(g.width(), 12.0);
        // 12 m box + 4 m body = 16 m at 12 m/s: 1.33 s from t = 20 s.
        let r = request(1, Side::South, 0, Turn::Straight, 20.0, 12.0);
        let b = trajectory_tiles(&r, &g, 1.0).unwrap();
        assert_eq!(b.steps().collect::<Vec<_>>(), vec![20, 21]);
    }

    #[test]
    fn time_shift_shifts_steps_only() {
        let g = twelve_metre_box();
        let r = request(1, Side::East, 1, Turn::Straight, 20.0, 12.0);
        let later = ReservationRequest { arrival_time: 30.0, ..r.clone() };
        let a = trajectory_tiles(&r, &g, 1.0).unwrap();
        let b = trajectory_tiles(&later, &g, 1.0).unwrap();
        assert_eq!(a.shifted(10), b);
    }

    #[test]
    fn parallel_non_adjacent_lanes_are_disjoint() {
        let g = IntersectionGeometry::four_way(&GeometrySpec::default(), 3).unwrap();
        let a = trajectory_tiles(&request(1, Side::South, 0, Turn::Straight, 5.0, 10.0), &g, 1.0).unwrap();
        let b = trajectory_tiles(&request(2, Side::South, 2, Turn::Straight, 5.0, 10.0), &g, 1.0).unwrap();
        assert!(!a.is_empty() && !b.is_empty());
        assert!(!a.intersects(&b));
        let c = trajectory_tiles(&request(3, Side::East, 1, Turn::Straight, 5.0, 10.0), &g, 1.0).unwrap();
        assert!(a.intersects(&c));
    }

    #[test]
    fn crossing_footprint_covers_the_body() {
        let g = IntersectionGeometry::four_way(&GeometrySpec::default(), 3).unwrap();
        // Lane 0 northbound spans x in [9, 12]; the 2 m body spans [9.5, 11.5].
        let b = trajectory_tiles(&request(1, Side::South, 0, Turn::Straight, 0.0, 10.0), &g, 1.0).unwrap();
        let n = g.grid() as u32;
        let xs: Vec<u32> = b.slots().map(|s| s.tile() % n).collect();
        let (lo, hi) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
        assert_eq!(lo, 38); // 9.5 m / 0.25
        assert_eq!(hi, 45); // last tile before 11.5 m
    }

    #[test]
    fn conflicts_examples() {
        let g = twelve_metre_box();
        let mut t = ReservationTable::new();
        let r1 = request(1, Side::South, 0, Turn::Straight, 3.0, 10.0);
        let b1 = trajectory_tiles(&r1, &g, 1.0).unwrap();
        assert!(!conflicts(&b1, &t, Some(2)));
        t.book(r1, b1.clone()).unwrap();
        assert!(conflicts(&b1, &t, Some(2)));
        assert!(!conflicts(&b1, &t, Some(1)));

        let one = b1.slots().nth(7).unwrap();
        let single = Bundle::from_slots([one, TileSlot::new(0, 999)], g.words());
        assert!(conflicts(&single, &t, Some(2)));
        let elsewhere = Bundle::from_slots([TileSlot::new(one.tile(), 999)], g.words());
        assert!(!conflicts(&elsewhere, &t, Some(2)));
    }

    #[test]
    fn remove_leaves_other_bookings() {
        let g = twelve_metre_box();
        let mut t = ReservationTable::new();
        let r1 = request(1, Side::South, 0, Turn::Straight, 3.0, 10.0);
        let r2 = request(2, Side::North, 0, Turn::Straight, 3.0, 10.0);
        let b1 = trajectory_tiles(&r1, &g, 1.0).unwrap();
        let b2 = trajectory_tiles(&r2, &g, 1.0).unwrap();
        assert!(!b1.intersects(&b2));
        t.book(r1, b1).unwrap();
        t.book(r2, b2.clone()).unwrap();
        t.remove(1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.occupied(), b2.len());
        for s in b2.slots() {
            assert_eq!(t.holder(s), Some(2));
        }
    }

    #[test]
    fn double_booking_is_refused() {
        let g = twelve_metre_box();
        let mut t = ReservationTable::new();
        let r1 = request(1, Side::South, 0, Turn::Straight, 3.0, 10.0);
        let b1 = trajectory_tiles(&r1, &g, 1.0).unwrap();
        t.book(r1.clone(), b1.clone()).unwrap();
        let r2 = ReservationRequest { vehicle: 2, ..r1 };
        assert!(t.book(r2, b1).is_err());
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn illegal_turn_is_an_error() {
        let g = twelve_metre_box();
        let r = request(1, Side::South, 1, Turn::Left, 3.0, 10.0);
        assert!(matches!(trajectory_tiles(&r, &g, 1.0), Err(Error::IllegalTurn { .. })));
    }
}
