use serde::{Deserialize, Serialize};

use crate::num::Scalar;
use crate::roadnet::{LinkId, LinkPrices, NetworkGraph, NodeId};

/// Price floor δ and zero-escape increment ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRule<T = f64> {
    pub floor: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for PriceRule<T> {
    fn default() -> Self {
        PriceRule {
            floor: T::zero(),
            epsilon: T::one(),
        }
    }
}

/// s(l) = share · μ_opt · ℓ(l) · lanes, with μ_opt in vehicles per km per
/// lane and the length in metres.
pub fn supply<T: Scalar>(length_m: T, lanes: u32, mu_opt: T, share: T) -> T {
    share * mu_opt * length_m / T::lit(1000.0) * T::from_count(lanes as usize)
}

/// Supply rounded half-up to whole vehicles.
pub fn supply_count<T: Scalar>(s: T) -> u64 {
    (s + T::lit(0.5)).floor().to_u64().unwrap_or(0)
}

/// z = d − s.
pub fn excess_demand<T: Scalar>(demand: T, supply: T) -> T {
    demand - supply
}

/// p' = max(δ, p + max(p, ε) · z / s).
pub fn update_price<T: Scalar>(price: T, excess: T, supply: T, rule: &PriceRule<T>) -> T {
    let effective = price.max(rule.epsilon);
    rule.floor.max(price + effective * excess / supply)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMarketState {
    pub intersection: NodeId,
    pub link: LinkId,
    pub price: f64,
    pub supply: f64,
    pub demand: u64,
}

/// Prices per link; links that do not enter an intersection are free.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceVector {
    prices: Vec<f64>,
}

impl PriceVector {
    pub fn zeros(links: usize) -> Self {
        PriceVector {
            prices: vec![0.0; links],
        }
    }

    pub fn get(&self, link: LinkId) -> f64 {
        self.prices.get(link.0).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, link: LinkId, price: f64) {
        self.prices[link.0] = price;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }
}

impl LinkPrices for PriceVector {
    fn price(&self, link: LinkId) -> f64 {
        self.get(link)
    }
}

/// One row of the price log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLogRow {
    pub time_s: f64,
    pub intersection: String,
    pub link: String,
    pub price: f64,
    pub demand: u64,
    pub supply: f64,
}

/// Market state of every intersection incoming link.
#[derive(Debug, Clone)]
pub struct Market {
    states: Vec<LinkMarketState>,
    rule: PriceRule<f64>,
}

impl Market {
    pub fn new(graph: &NetworkGraph, mu_opt: f64, share: f64, rule: PriceRule<f64>) -> Self {
        let states = (0..graph.links().len())
            .map(LinkId)
            .filter(|&l| graph.is_incoming(l))
            .map(|l| {
                let link = graph.link(l);
                LinkMarketState {
                    intersection: link.to,
                    link: l,
                    price: rule.floor,
                    supply: supply(link.length_m, link.lanes, mu_opt, share),
                    demand: 0,
                }
            })
            .collect();
        Market { states, rule }
    }

    pub fn states(&self) -> &[LinkMarketState] {
        &self.states
    }

    /// One tâtonnement step per link; `demand(link)` counts the vehicles
    /// that want to cross the link's intersection.
    pub fn update(&mut self, demand: impl Fn(LinkId) -> u64) {
        for s in &mut self.states {
            s.demand = demand(s.link);
            let z = excess_demand(s.demand as f64, s.supply);
            s.price = update_price(s.price, z, s.supply, &self.rule);
        }
    }

    pub fn snapshot(&self, links: usize) -> PriceVector {
        let mut v = PriceVector::zeros(links);
        for s in &self.states {
            v.set(s.link, s.price);
        }
        v
    }

    pub fn log_rows(&self, graph: &NetworkGraph, time_s: f64) -> Vec<PriceLogRow> {
        self.states
            .iter()
            .map(|s| PriceLogRow {
                time_s,
                intersection: graph.node(s.intersection).name.clone(),
                link: graph.link(s.link).name.clone(),
                price: s.price,
                demand: s.demand,
                supply: s.supply,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RULE: PriceRule<f64> = PriceRule {
        floor: 0.0,
        epsilon: 1.0,
    };

    #[test]
    fn supply_examples() {
        assert_eq!(supply(1000.0, 1, 40.0, 0.5), 20.0);
        assert_eq!(supply(500.0, 1, 40.0, 0.5), 10.0);
        assert_eq!(supply(1000.0, 2, 40.0, 0.5), 40.0);
        assert_eq!(supply_count(12.5), 13);
        assert_eq!(supply_count(12.49), 12);
    }

    #[test]
    fn excess_demand_examples() {
        assert_eq!(excess_demand(30.0, 20.0), 10.0);
        assert_eq!(excess_demand(20.0, 20.0), 0.0);
        assert_eq!(excess_demand(0.0, 20.0), -20.0);
    }

    #[test]
    fn update_examples() {
        assert!((update_price(10.0, 5.0, 50.0, &RULE) - 11.0).abs() < 1e-12);
        assert_eq!(update_price(10.0, -50.0, 50.0, &RULE), 0.0);
        assert_eq!(update_price(0.0, 25.0, 50.0, &RULE), 0.5);
        assert_eq!(update_price(10.0f32, 5.0, 50.0, &PriceRule::default()), 11.0);
    }

    #[test]
    fn literal_rule_is_stuck_at_zero() {
        let literal = PriceRule {
            floor: 0.0,
            epsilon: 0.0,
        };
        for z in [-30.0, 0.0, 1.0, 1e6] {
            assert_eq!(update_price(0.0, z, 50.0, &literal), 0.0);
        }
    }

    #[test]
    fn tatonnement_converges_on_decreasing_demand() {
        // d(p) = 30 - 0.1 p crosses s = 20 at p* = 100.
        let s = 20.0;
        let demand = |p: f64| (30.0 - 0.1 * p).max(0.0);
        let mut p = 0.0;
        let mut reached = None;
        for i in 0..500 {
            p = update_price(p, excess_demand(demand(p), s), s, &RULE);
            if (p - 100.0).abs() <= 1.0 {
                reached.get_or_insert(i);
            }
        }
        assert!(reached.is_some(), "price {p}");
        assert!((p - 100.0).abs() <= 1.0, "price {p}");
    }

    proptest! {
        #[test]
        fn never_below_floor_and_sign_correct(
            p in 0.0f64..1e4, z in -1e3f64..1e3, s in 0.5f64..500.0, floor in 0.0f64..50.0, eps in 0.0f64..5.0
        ) {
            let rule = PriceRule { floor, epsilon: eps };
            let p = p.max(floor);
            let next = update_price(p, z, s, &rule);
            prop_assert!(next >= floor);
            if z > 0.0 { prop_assert!(next >= p); }
            if z < 0.0 { prop_assert!(next <= p); }
            if z == 0.0 { prop_assert_eq!(next, p); }
        }

        #[test]
        // The multiplicative step is stable at p* only while d(0) < 3 s.
        fn converges_for_random_linear_demand(r in 1.05f64..2.8, b in 0.05f64..0.5, s in 5.0f64..25.0) {
            let a = r * s;
            let p_star = (a - s) / b;
            let mut p = 0.0;
            for _ in 0..500 {
                p = update_price(p, (a - b * p).max(0.0) - s, s, &RULE);
            }
            prop_assert!((p - p_star).abs() <= 0.01 * p_star, "p={} p*={}", p, p_star);
        }
    }
}
