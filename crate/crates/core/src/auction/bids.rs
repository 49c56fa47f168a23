use crate::error::{Error, Result};
use crate::isect::{Bundle, ReservationRequest, VehicleId};

/// A reservation request with money attached and its tile-time bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bid {
    pub request: ReservationRequest,
    pub value: f64,
    pub bundle: Bundle,
}

impl Bid {
    pub fn id(&self) -> VehicleId {
        self.request.vehicle
    }
}

/// First bids are always valid; a resubmission may not lower the value.
pub fn validate_bid(new: f64, prior: Option<f64>) -> Result<()> {
    match prior {
        Some(prior) if new < prior => Err(Error::BidDecrease { prior, new }),
        _ => Ok(()),
    }
}

/// Live bids of one round, sorted by vehicle id, with their conflict
/// neighbourhoods.
#[derive(Debug, Clone, Default)]
pub struct BidSet {
    bids: Vec<Bid>,
    neighbours: Vec<Vec<usize>>,
    adjacency: Vec<Vec<u64>>,
}

impl BidSet {
    pub fn new(mut bids: Vec<Bid>) -> Result<Self> {
        bids.sort_by_key(Bid::id);
        for w in bids.windows(2) {
            if w[0].id() == w[1].id() {
                return Err(Error::MalformedRequest {
                    vehicle: w[0].id(),
                    reason: "two live bids in one round".into(),
                });
            }
        }
        for b in &bids {
            if !(b.value >= 0.0) || !b.value.is_finite() || b.bundle.is_empty() {
                return Err(Error::MalformedRequest {
                    vehicle: b.id(),
                    reason: format!("bid value {} over {} slots", b.value, b.bundle.len()),
                });
            }
        }
        let n = bids.len();
        let words = n.div_ceil(64).max(1);
        let mut neighbours = vec![Vec::new(); n];
        let mut adjacency = vec![vec![0u64; words]; n];
        for i in 0..n {
            for j in i + 1..n {
                if bids[i].bundle.intersects(&bids[j].bundle) {
                    neighbours[i].push(j);
                    neighbours[j].push(i);
                    adjacency[i][j / 64] |= 1 << (j % 64);
                    adjacency[j][i / 64] |= 1 << (i % 64);
                }
            }
        }
        Ok(BidSet {
            bids,
            neighbours,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn bid(&self, i: usize) -> &Bid {
        &self.bids[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.bids[i].value
    }

    /// Indices of bids sharing at least one slot with bid `i`.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn conflict(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j / 64] & (1 << (j % 64)) != 0
    }

    pub fn into_bids(self) -> Vec<Bid> {
        self.bids
    }
}

/// A conflict-free selection of bids (indices into a [`BidSet`], ascending).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WinnerSet {
    pub members: Vec<usize>,
    pub value: f64,
}

impl WinnerSet {
    pub fn from_members(set: &BidSet, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        let value = members.iter().map(|&i| set.value(i)).sum();
        WinnerSet { members, value }
    }

    pub fn ids(&self, set: &BidSet) -> Vec<VehicleId> {
        self.members.iter().map(|&i| set.bid(i).id()).collect()
    }

    pub fn is_feasible(&self, set: &BidSet) -> bool {
        self.members.iter().enumerate().all(|(k, &i)| {
            self.members[k + 1..]
                .iter()
                .all(|&j| !set.bid(i).bundle.intersects(&set.bid(j).bundle))
        })
    }
}
