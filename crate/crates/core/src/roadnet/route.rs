use crate::num::Scalar;

use super::{LinkId, NetworkGraph};

/// An ordered, loopless sequence of links with its free-flow time.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub links: Vec<LinkId>,
    pub free_flow_s: f64,
    pub(crate) cost_ns: u64,
}

impl Route {
    /// Builds a route from consecutive links. Panics if the links do not chain.
    pub fn new(graph: &NetworkGraph, links: Vec<LinkId>) -> Self {
        assert!(!links.is_empty(), "route must contain at least one link");
        for w in links.windows(2) {
            assert_eq!(
                graph.link(w[0]).to,
                graph.link(w[1]).from,
                "route links do not share a node"
            );
        }
        let cost_ns = links.iter().map(|&l| graph.cost_ns(l)).sum();
        let free_flow_s = free_flow_time(links.iter().map(|&l| {
            let link = graph.link(l);
            (link.length_m, link.vmax_mps)
        }));
        Route {
            links,
            free_flow_s,
            cost_ns,
        }
    }

    pub fn origin(&self, graph: &NetworkGraph) -> super::NodeId {
        graph.link(self.links[0]).from
    }

    pub fn destination(&self, graph: &NetworkGraph) -> super::NodeId {
        graph.link(*self.links.last().unwrap()).to
    }

    /// Link-name ranks, the lexicographic tie-break key.
    pub(crate) fn rank_key(&self, graph: &NetworkGraph) -> Vec<u32> {
        self.links.iter().map(|&l| graph.rank(l)).collect()
    }

    pub fn label(&self, graph: &NetworkGraph) -> String {
        self.links
            .iter()
            .map(|&l| graph.link(l).name.as_str())
            .collect::<Vec<_>>()
            .join(">")
    }
}

/// Sum of `length / vmax` over `(length, vmax)` pairs.
pub fn free_flow_time<T: Scalar>(links: impl IntoIterator<Item = (T, T)>) -> T {
    links
        .into_iter()
        .fold(T::zero(), |acc, (length, vmax)| acc + length / vmax)
}

/// Price lookup for intersection incoming links.
pub trait LinkPrices {
    fn price(&self, link: LinkId) -> f64;
}

impl LinkPrices for [f64] {
    fn price(&self, link: LinkId) -> f64 {
        self.get(link.0).copied().unwrap_or(0.0)
    }
}

impl LinkPrices for Vec<f64> {
    fn price(&self, link: LinkId) -> f64 {
        self.as_slice().price(link)
    }
}

/// Sum of link prices along the route; links that do not feed an
/// intersection cost nothing.
pub fn route_price<P: LinkPrices + ?Sized>(graph: &NetworkGraph, route: &Route, prices: &P) -> f64 {
    route
        .links
        .iter()
        .filter(|&&l| graph.is_incoming(l))
        .map(|&l| prices.price(l))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::graph::tests::{doc, link};
    use crate::roadnet::load_network;
    use crate::scenario::LinkDoc;
    use proptest::prelude::*;

    #[test]
    fn free_flow_examples() {
        assert_eq!(free_flow_time([(500.0, 25.0)]), 20.0);
        assert_eq!(free_flow_time([(500.0, 25.0), (500.0, 25.0)]), 40.0);
        assert_eq!(free_flow_time([(500.0f32, 25.0f32)]), 20.0f32);
    }

    proptest! {
        #[test]
        fn free_flow_is_additive(
            a in prop::collection::vec((1.0..2000.0f64, 1.0..40.0f64), 1..6),
            b in prop::collection::vec((1.0..2000.0f64, 1.0..40.0f64), 1..6),
        ) {
            let joined: Vec<_> = a.iter().chain(b.iter()).copied().collect();
            let lhs = free_flow_time(joined);
            let rhs = free_flow_time(a) + free_flow_time(b);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        }
    }

    /// Two intersections in a row: W-A-B-E with side spurs so A and B have
    /// three neighbours each.
    fn corridor() -> NetworkGraph {
        let mut links: Vec<LinkDoc> = vec![
            link("W-A", "W", "A", 100.0),
            link("A-B", "A", "B", 100.0),
            link("B-E", "B", "E", 100.0),
        ];
        for (n, s) in [("A", "An"), ("A", "As"), ("B", "Bn"), ("B", "Bs")] {
            links.push(link(&format!("{s}-{n}"), s, n, 50.0));
        }
        load_network(&doc(
            &[
                ("W", 0.0, 0.0),
                ("A", 100.0, 0.0),
                ("B", 200.0, 0.0),
                ("E", 300.0, 0.0),
                ("An", 100.0, 50.0),
                ("As", 100.0, -50.0),
                ("Bn", 200.0, 50.0),
                ("Bs", 200.0, -50.0),
            ],
            links,
        ))
        .unwrap()
    }

    #[test]
    fn route_price_examples() {
        let g = corridor();
        let ids: Vec<LinkId> = ["W-A", "A-B", "B-E"].iter().map(|n| g.link_id(n).unwrap()).collect();
        let route = Route::new(&g, ids.clone());
        let mut prices = vec![0.0; g.links().len()];
        assert_eq!(route_price(&g, &route, &prices), 0.0);
        prices[ids[0].0] = 10.0;
        prices[ids[1].0] = 25.0;
        // B-E does not feed an intersection; its entry is ignored.
        prices[ids[2].0] = 99.0;
        assert_eq!(route_price(&g, &route, &prices), 35.0);
        prices[ids[0].0] = 0.0;
        assert_eq!(route_price(&g, &route, &prices), 25.0);
    }

    proptest! {
        #[test]
        fn route_price_monotone(p0 in 0.0..500.0f64, p1 in 0.0..500.0f64, bump in 0.0..100.0f64, which in 0usize..2) {
            let g = corridor();
            let ids: Vec<LinkId> = ["W-A", "A-B", "B-E"].iter().map(|n| g.link_id(n).unwrap()).collect();
            let route = Route::new(&g, ids.clone());
            let mut prices = vec![0.0; g.links().len()];
            prices[ids[0].0] = p0;
            prices[ids[1].0] = p1;
            let before = route_price(&g, &route, &prices);
            prices[ids[which].0] += bump;
            prop_assert!(route_price(&g, &route, &prices) >= before);
        }
    }
}
