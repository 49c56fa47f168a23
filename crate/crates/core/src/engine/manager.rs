//! Intersection manager: owns the reservation table and runs the control
//! policy (immediate FCFS replies or periodic auction rounds).

use std::collections::VecDeque;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::auction::{run_auction_round, BidHistory, BidSet, Budget, RoundConfig};
use crate::error::Result;
use crate::isect::{
    fcfs_process, DistanceFilter, IntersectionGeometry, Reply, ReservationRequest, ReservationTable, Side, VehicleId,
};

/// One closed auction round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionLogRow {
    pub time_s: f64,
    pub intersection: String,
    pub requests: usize,
    pub candidates: usize,
    pub winners: usize,
    pub winner_value: f64,
}

#[derive(Debug, Clone)]
enum Policy {
    Fcfs,
    Auction {
        round: RoundConfig,
        period: u64,
        delay: u64,
        history: BidHistory,
        bids: Vec<ReservationRequest>,
        outbox: VecDeque<(u64, Reply)>,
    },
}

#[derive(Debug, Clone)]
pub struct Manager {
    pub name: String,
    pub geometry: Arc<IntersectionGeometry>,
    table: ReservationTable,
    filter: DistanceFilter,
    policy: Policy,
    dt: f64,
    pub requests: u64,
    pub rejections: u64,
    pub log: Vec<AuctionLogRow>,
    /// Winner determination instances, kept once [`Manager::capture_rounds`]
    /// has been called.
    pub captured: Vec<BidSet>,
}

impl Manager {
    pub fn new(name: String, geometry: Arc<IntersectionGeometry>, config: &RunConfig) -> Self {
        let policy = if config.mode.is_auction() {
            let budget = if config.wdp_wall_ms > 0 {
                Budget::WallClock(std::time::Duration::from_millis(config.wdp_wall_ms))
            } else {
                Budget::Passes(config.wdp_passes)
            };
            Policy::Auction {
                round: RoundConfig {
                    wp: config.wp,
                    np: config.np,
                    budget,
                    dt: config.dt_s,
                    capture: false,
                },
                period: (config.collect_ticks + config.wdp_ticks).max(1) as u64,
                delay: config.wdp_ticks as u64,
                history: BidHistory::default(),
                bids: Vec::new(),
                outbox: VecDeque::new(),
            }
        } else {
            Policy::Fcfs
        };
        Manager {
            name,
            geometry,
            table: ReservationTable::new(),
            filter: DistanceFilter::new(),
            policy,
            dt: config.dt_s,
            requests: 0,
            rejections: 0,
            log: Vec::new(),
            captured: Vec::new(),
        }
    }

    pub fn capture_rounds(&mut self) {
        if let Policy::Auction { round, .. } = &mut self.policy {
            round.capture = true;
        }
    }

    /// Tick at which a request sent at `tick` is answered.
    pub fn reply_tick(&self, tick: u64) -> u64 {
        match &self.policy {
            Policy::Fcfs => tick,
            Policy::Auction { period, delay, .. } => tick.div_ceil(*period) * period + delay,
        }
    }

    /// Hands a request to the manager. FCFS answers at once; an auction
    /// queues the bid for the next round.
    pub fn submit(&mut self, request: ReservationRequest, now: f64) -> Result<Option<Reply>> {
        self.requests += 1;
        match &mut self.policy {
            Policy::Fcfs => {
                let reply = fcfs_process(&request, &self.geometry, &mut self.table, &mut self.filter, now, self.dt)?;
                if !reply.is_confirmed() {
                    self.rejections += 1;
                }
                Ok(Some(reply))
            }
            Policy::Auction { bids, .. } => {
                bids.push(request);
                Ok(None)
            }
        }
    }

    /// Closes the auction round due at `tick`, if any; replies are held
    /// back until the winner determination time has passed.
    pub fn close_round(
        &mut self,
        tick: u64,
        reserve: impl Fn(&ReservationRequest) -> f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let Policy::Auction {
            round,
            period,
            delay,
            history,
            bids,
            outbox,
        } = &mut self.policy
        else {
            return Ok(());
        };
        if tick % *period != 0 || bids.is_empty() {
            return Ok(());
        }
        let now = tick as f64 * self.dt;
        let requests = std::mem::take(bids);
        let n = requests.len();
        let mut out = run_auction_round(
            requests,
            reserve,
            &self.geometry,
            &mut self.table,
            &mut self.filter,
            history,
            now,
            round,
            rng,
        )?;
        self.rejections += out.rejections.len() as u64;
        self.captured.extend(out.instance.take());
        self.log.push(AuctionLogRow {
            time_s: now,
            intersection: self.name.clone(),
            requests: n,
            candidates: out.candidates,
            winners: out.confirmations.len(),
            winner_value: out.winner_value,
        });
        for reply in out.replies() {
            outbox.push_back((tick + *delay, reply));
        }
        Ok(())
    }

    /// Replies due for delivery at `tick`.
    pub fn deliver(&mut self, tick: u64) -> Vec<Reply> {
        let Policy::Auction { outbox, .. } = &mut self.policy else {
            return Vec::new();
        };
        let mut due = Vec::new();
        while outbox.front().is_some_and(|(t, _)| *t <= tick) {
            due.push(outbox.pop_front().unwrap().1);
        }
        due
    }

    /// Drops a booking the vehicle can no longer honour.
    pub fn cancel(&mut self, vehicle: VehicleId) {
        self.table.remove(vehicle);
    }

    /// The vehicle has cleared the box.
    pub fn release(&mut self, vehicle: VehicleId) {
        self.table.remove(vehicle);
        if let Policy::Auction { history, .. } = &mut self.policy {
            history.forget(vehicle);
        }
    }

    pub fn prior_bid(&self, vehicle: VehicleId) -> Option<f64> {
        match &self.policy {
            Policy::Auction { history, .. } => history.prior(vehicle),
            Policy::Fcfs => None,
        }
    }

    pub fn distance_limit(&self, side: Side, lane: u8) -> f64 {
        self.filter.limit(side, lane)
    }

    pub fn table(&self) -> &ReservationTable {
        &self.table
    }
}
